import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? `ws://${window.location.hostname || "127.0.0.1"}:60121`;
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const app = createApp(document, root, new WebSocket(wsUrl));

// The daemon does not serve source text; load it from alongside the static
// assets when available so the code pane has something to show.
const sourceUrl = params.get("source");
if (sourceUrl) {
  fetch(sourceUrl)
    .then((res) => (res.ok ? res.text() : Promise.reject(res.statusText)))
    .then((text) => app.codePane.setSource(sourceUrl.split("/").pop() ?? sourceUrl, text))
    .catch(() => undefined);
}
