from .lstm import LSTM
from .attention import MultiHeadSelfAttention
from .adamw import AdamW
from .losses import masked_mse
from .gradcheck import finite_difference_check

__all__ = ["LSTM", "MultiHeadSelfAttention", "AdamW", "masked_mse",
           "finite_difference_check"]
