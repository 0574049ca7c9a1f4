from .frank_wolfe import FrankWolfeConfig, FrankWolfeResult, LmoResult, frank_wolfe
from .lp import delta_com_greedy, solve_lp
from .sdp import (AffineConstraint, CompiledSdp, PsdBlock, ScalarVar, SdpProblem,
                  SdpSolution, solve_sdp)

__all__ = [
    "AffineConstraint", "CompiledSdp", "FrankWolfeConfig", "FrankWolfeResult",
    "LmoResult", "PsdBlock", "ScalarVar", "SdpProblem", "SdpSolution",
    "delta_com_greedy", "frank_wolfe", "solve_lp", "solve_sdp",
]
