const UNITS = ["B", "KiB", "MiB", "GiB", "TiB"];

export function formatBytes(bytes: number): string {
  let value = bytes;
  let unit = 0;
  while (value >= 1024 && unit < UNITS.length - 1) {
    value /= 1024;
    unit += 1;
  }
  const digits = value >= 100 || unit === 0 ? 0 : value >= 10 ? 1 : 2;
  return `${value.toFixed(digits)} ${UNITS[unit]}`;
}

export function formatThroughput(samplesPerS: number): string {
  return `${samplesPerS >= 100 ? samplesPerS.toFixed(0) : samplesPerS.toFixed(1)} samples/s`;
}

export function formatMs(ms: number): string {
  return `${ms >= 100 ? ms.toFixed(0) : ms.toFixed(2)} ms`;
}

export function formatPercent(part: number, whole: number): string {
  if (whole <= 0) return "0%";
  return `${((100 * part) / whole).toFixed(1)}%`;
}
