"""Three-layer feed-forward subject used to exercise the collector."""

import torch
from torch import nn

IN_FEATURES = 32
OUT_FEATURES = 10


class FeedForward(nn.Module):
    def __init__(self, width=64):
        super().__init__()
        self.input_layer = nn.Linear(IN_FEATURES, width)
        self.hidden_layer = nn.Linear(width, width)
        self.output_layer = nn.Linear(width, OUT_FEATURES)

    def forward(self, x):
        x = torch.relu(self.input_layer(x))
        x = torch.relu(self.hidden_layer(x))
        return self.output_layer(x)


def model_provider():
    return FeedForward()


def input_provider(batch_size=16):
    torch.manual_seed(0)
    return torch.randn(batch_size, IN_FEATURES)


def iteration_provider(model):
    optimizer = torch.optim.SGD(model.parameters(), lr=0.01)
    loss_fn = nn.MSELoss()

    def train_step():
        inputs = input_provider()
        target = torch.zeros(inputs.shape[0], OUT_FEATURES)
        optimizer.zero_grad()
        loss = loss_fn(model(inputs), target)
        loss.backward()
        optimizer.step()

    return train_step
