from .gridmap import GridMap, load_map, read_map
from .domains import (
    EPISODE_CAP,
    SLIP_PROBABILITY,
    Action,
    CookieWorld,
    EnvState,
    GridDomain,
    KeysWorld,
    Observation,
    SimpleCookieWorld,
    SymbolWorld,
    Transition,
    make_domain,
)
from .model import EnvModel, OraclePolicy, enumerate_model, oracle_value_iteration
