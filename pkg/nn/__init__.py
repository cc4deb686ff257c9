from .gradcheck import finite_difference_check
from .layers import GRUParams, LSTMParams, affine, gru_cell_step, lstm_cell_step, softmax
from .params import ParameterStore, adam_step, load_parameters, save_parameters
from .tensor import Tape, Tensor, backward
