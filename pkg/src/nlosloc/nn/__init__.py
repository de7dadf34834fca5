"""Small numpy neural-network engine: dense and LSTM layers, Adam, MSE training."""

from .activations import gelu, gelu_approx, gelu_grad, sigmoid
from .layers import LSTM, Dense, dense_params, lstm_params
from .losses import WeightedMSE
from .network import Network
from .optim import Adam
from .train import History, TrainingDiverged, TrainSchedule, evaluate_loss, train

__all__ = ["gelu", "gelu_approx", "gelu_grad", "sigmoid", "Dense", "LSTM", "dense_params",
           "lstm_params", "WeightedMSE", "Network", "Adam", "History", "TrainingDiverged",
           "TrainSchedule", "evaluate_loss", "train"]
