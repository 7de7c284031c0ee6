"""Scenario configuration: typed config, scenario-file parsing, validation.

Scenario files are flat ``[section]`` / ``key = value`` text. Unknown
sections or keys are errors (fail-closed), as are malformed values; the
parser reports line numbers. ``validate_config`` performs the full constraint
check, including topology connectivity and plan-time latency feasibility,
without running a simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import netmodel, planner
from .lifetime import LifetimeParams
from .netmodel import LatencyEnergyConfig, TopologyError

WH_TO_J = 3600.0

STRATEGIES = ("PDD", "PDD-CR", "DistrDataFwd")

FULL_HORIZON_CYCLES = 7_200_000   # 2000 hours at one-second cycles


@dataclass
class InterferenceConfig:
    prob_per_cycle: float = 0.001    # chance of an interference event each cycle
    multiplier: float = 2.5          # transient factor on the affected link's cost
    affected_links: int = 1          # directed links hit per event
    duration_cycles: int = 1         # cycles before the cost reverts


@dataclass
class ScenarioConfig:
    # topology
    rows: int = 3
    cols: int = 6
    spacing_m: float = 2.5
    range_m: float = 3.6
    proxies: tuple[int, ...] = (4, 7, 10, 13)
    # links & energy prices
    latency_ms_min: float = 8.0
    latency_ms_max: float = 12.0
    tx_energy_j: float = 50e-6
    controller_energy_j: float = 50e-3
    config_phase_energy_j: float = 5e-3
    # node endowments (specified in Wh, scaled once at load)
    node_energy_wh_min: float = 0.0
    node_energy_wh_max: float = 1.0
    proxy_energy_wh: float = 3.0
    battery_cap_wh: float = 3.071    # 830 mAh at 3.7 V
    energy_scale: float = 1.0 / 60.0
    # data
    consumer_fraction: float = 0.25
    rate_min: int = 1
    rate_max: int = 8
    piece_size_bytes: int = 9
    request_prob: float = 0.05
    # protocol
    latency_budget_ms: float = 100.0
    trigger_threshold: float = 0.5
    route_ttl: int = 2
    cycle_seconds: float = 1.0
    # interference
    interference: InterferenceConfig = field(default_factory=InterferenceConfig)
    # run
    horizon: int = 20_000
    strategy: str = "DistrDataFwd"
    seed: int = 1
    forced_deaths: tuple[tuple[int, int], ...] = ()   # (cycle, node)
    trace: bool = False
    audit_energy: bool = False
    metrics_stride: int = 0   # 0 = automatic: every cycle up to 200k, thinned beyond

    def effective_metrics_stride(self) -> int:
        if self.metrics_stride > 0:
            return self.metrics_stride
        if self.horizon <= 200_000:
            return 1
        return max(1, self.horizon // 100_000)

    def link_params(self) -> LatencyEnergyConfig:
        return LatencyEnergyConfig(
            latency_ms_min=self.latency_ms_min,
            latency_ms_max=self.latency_ms_max,
            tx_energy_j_min=self.tx_energy_j,
            tx_energy_j_max=self.tx_energy_j,
            controller_energy_j=self.controller_energy_j,
            node_energy_j_min=self.node_energy_wh_min * WH_TO_J * self.energy_scale,
            node_energy_j_max=self.node_energy_wh_max * WH_TO_J * self.energy_scale,
            proxy_energy_j=self.proxy_energy_wh * WH_TO_J * self.energy_scale,
        )

    def lifetime_params(self) -> LifetimeParams:
        return LifetimeParams(
            config_phase_energy_j=self.config_phase_energy_j,
            cycle_seconds=self.cycle_seconds,
            trigger_threshold=self.trigger_threshold,
        )

    def full_horizon(self) -> "ScenarioConfig":
        return replace(self, horizon=FULL_HORIZON_CYCLES, energy_scale=1.0)


class ScenarioParseError(ValueError):
    pass


@dataclass(frozen=True)
class Finding:
    severity: str   # "error" | "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.field}: {self.message}"


# section -> key -> (attribute, converter)
def _int(s: str) -> int:
    return int(s)


def _float(s: str) -> float:
    return float(s)


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _id_list(s: str) -> tuple[int, ...]:
    s = s.strip()
    if not s:
        return ()
    return tuple(int(part.strip()) for part in s.split(","))


def _death_list(s: str) -> tuple[tuple[int, int], ...]:
    s = s.strip()
    if not s:
        return ()
    out = []
    for part in s.split(","):
        cycle, _, node = part.strip().partition(":")
        if not _:
            raise ValueError(f"expected cycle:node, got {part.strip()!r}")
        out.append((int(cycle), int(node)))
    return tuple(out)


_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "topology": {
        "rows": ("rows", _int),
        "cols": ("cols", _int),
        "spacing_m": ("spacing_m", _float),
        "range_m": ("range_m", _float),
        "proxies": ("proxies", _id_list),
    },
    "links": {
        "latency_ms_min": ("latency_ms_min", _float),
        "latency_ms_max": ("latency_ms_max", _float),
        "tx_energy_j": ("tx_energy_j", _float),
        "controller_energy_j": ("controller_energy_j", _float),
        "config_phase_energy_j": ("config_phase_energy_j", _float),
    },
    "energy": {
        "node_wh_min": ("node_energy_wh_min", _float),
        "node_wh_max": ("node_energy_wh_max", _float),
        "proxy_wh": ("proxy_energy_wh", _float),
        "battery_cap_wh": ("battery_cap_wh", _float),
        "scale": ("energy_scale", _float),
    },
    "data": {
        "consumer_fraction": ("consumer_fraction", _float),
        "rate_min": ("rate_min", _int),
        "rate_max": ("rate_max", _int),
        "piece_size_bytes": ("piece_size_bytes", _int),
        "request_prob": ("request_prob", _float),
    },
    "protocol": {
        "latency_budget_ms": ("latency_budget_ms", _float),
        "trigger_threshold": ("trigger_threshold", _float),
        "route_ttl": ("route_ttl", _int),
        "cycle_seconds": ("cycle_seconds", _float),
    },
    "interference": {
        "prob": ("interference.prob_per_cycle", _float),
        "multiplier": ("interference.multiplier", _float),
        "affected_links": ("interference.affected_links", _int),
        "duration_cycles": ("interference.duration_cycles", _int),
    },
    "run": {
        "horizon": ("horizon", _int),
        "strategy": ("strategy", str),
        "seed": ("seed", _int),
        "trace": ("trace", _bool),
        "metrics_stride": ("metrics_stride", _int),
    },
    "events": {
        "forced_deaths": ("forced_deaths", _death_list),
    },
}


def parse_scenario(text: str, origin: str = "<scenario>") -> ScenarioConfig:
    """Parse a scenario document. Raises ScenarioParseError naming the line
    and field on the first problem (unknown key, bad value, stray text)."""
    cfg = ScenarioConfig()
    interference = InterferenceConfig()
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ScenarioParseError(
                    f"{origin}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ScenarioParseError(
                f"{origin}:{lineno}: expected key = value, got {line!r}")
        if section is None:
            raise ScenarioParseError(
                f"{origin}:{lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        entry = _SCHEMA[section].get(key)
        if entry is None:
            raise ScenarioParseError(
                f"{origin}:{lineno}: unknown key {key!r} in [{section}]")
        attr, conv = entry
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ScenarioParseError(
                f"{origin}:{lineno}: bad value for {section}.{key}: {exc}") from exc
        if attr.startswith("interference."):
            setattr(interference, attr.split(".", 1)[1], parsed)
        else:
            setattr(cfg, attr, parsed)
    cfg.interference = interference
    return cfg


def render_scenario(cfg: ScenarioConfig) -> str:
    """Inverse of parse_scenario for the shipped defaults and test fixtures.
    Floats render via repr, so a round trip reproduces the config exactly."""
    deaths = ", ".join(f"{c}:{n}" for c, n in cfg.forced_deaths)
    return f"""[topology]
rows = {cfg.rows}
cols = {cfg.cols}
spacing_m = {cfg.spacing_m!r}
range_m = {cfg.range_m!r}
proxies = {", ".join(map(str, cfg.proxies))}

[links]
latency_ms_min = {cfg.latency_ms_min!r}
latency_ms_max = {cfg.latency_ms_max!r}
tx_energy_j = {cfg.tx_energy_j!r}
controller_energy_j = {cfg.controller_energy_j!r}
config_phase_energy_j = {cfg.config_phase_energy_j!r}

[energy]
node_wh_min = {cfg.node_energy_wh_min!r}
node_wh_max = {cfg.node_energy_wh_max!r}
proxy_wh = {cfg.proxy_energy_wh!r}
battery_cap_wh = {cfg.battery_cap_wh!r}
scale = {cfg.energy_scale!r}

[data]
consumer_fraction = {cfg.consumer_fraction!r}
rate_min = {cfg.rate_min}
rate_max = {cfg.rate_max}
piece_size_bytes = {cfg.piece_size_bytes}
request_prob = {cfg.request_prob!r}

[protocol]
latency_budget_ms = {cfg.latency_budget_ms!r}
trigger_threshold = {cfg.trigger_threshold!r}
route_ttl = {cfg.route_ttl}
cycle_seconds = {cfg.cycle_seconds!r}

[interference]
prob = {cfg.interference.prob_per_cycle!r}
multiplier = {cfg.interference.multiplier!r}
affected_links = {cfg.interference.affected_links}
duration_cycles = {cfg.interference.duration_cycles}

[run]
horizon = {cfg.horizon}
strategy = {cfg.strategy}
seed = {cfg.seed}
trace = {str(cfg.trace).lower()}
metrics_stride = {cfg.metrics_stride}

[events]
forced_deaths = {deaths}
"""


def validate_config(cfg: ScenarioConfig) -> list[Finding]:
    """Full constraint report without running: ranges, connectivity, and
    plan-time feasibility of the latency budget."""
    findings: list[Finding] = []

    def err(fieldname: str, message: str) -> None:
        findings.append(Finding("error", fieldname, message))

    def warn(fieldname: str, message: str) -> None:
        findings.append(Finding("warning", fieldname, message))

    if cfg.rows * cfg.cols < 2:
        err("topology.rows/cols", "need at least two nodes")
    if cfg.spacing_m <= 0 or cfg.range_m <= 0:
        err("topology.spacing_m/range_m", "must be positive")
    if cfg.range_m < cfg.spacing_m:
        err("topology.range_m", "smaller than the grid spacing: disconnected topology")
    if not cfg.proxies:
        err("topology.proxies", "at least one proxy is required")
    node_count = cfg.rows * cfg.cols
    bad = [p for p in cfg.proxies if not 0 <= p < node_count]
    if bad:
        err("topology.proxies", f"ids outside the grid: {bad}")
    elif len(cfg.proxies) > node_count // 2:
        warn("topology.proxies", "more than half the nodes are proxies")

    if cfg.latency_ms_min <= 0 or cfg.latency_ms_max < cfg.latency_ms_min:
        err("links.latency_ms_min/max", "need 0 < min <= max")
    if cfg.tx_energy_j <= 0:
        err("links.tx_energy_j", "must be positive")
    if cfg.controller_energy_j <= cfg.tx_energy_j:
        warn("links.controller_energy_j",
             "controller exchanges should cost far more than one-hop sends")
    if cfg.config_phase_energy_j < 0:
        err("links.config_phase_energy_j", "must be >= 0")

    if cfg.node_energy_wh_min < 0 or cfg.node_energy_wh_max < cfg.node_energy_wh_min:
        err("energy.node_wh_min/max", "need 0 <= min <= max")
    if cfg.node_energy_wh_max > cfg.battery_cap_wh:
        err("energy.node_wh_max", f"exceeds battery capacity {cfg.battery_cap_wh} Wh")
    if cfg.proxy_energy_wh > cfg.battery_cap_wh:
        err("energy.proxy_wh", f"exceeds battery capacity {cfg.battery_cap_wh} Wh")
    if cfg.proxy_energy_wh <= cfg.node_energy_wh_max:
        warn("energy.proxy_wh", "proxies should start far richer than normal nodes")
    if cfg.energy_scale <= 0:
        err("energy.scale", "must be positive")

    if not 0.0 < cfg.consumer_fraction <= 1.0:
        err("data.consumer_fraction", "must lie in (0, 1]")
    if cfg.rate_min < 0 or cfg.rate_max < cfg.rate_min:
        err("data.rate_min/max", "need 0 <= min <= max")
    if not 0.0 <= cfg.request_prob <= 1.0:
        err("data.request_prob", "must lie in [0, 1]")

    if cfg.latency_budget_ms <= 0:
        err("protocol.latency_budget_ms", "must be positive")
    if not 0.0 < cfg.trigger_threshold < 1.0:
        err("protocol.trigger_threshold", "must lie in (0, 1)")
    if cfg.route_ttl < 1:
        err("protocol.route_ttl", "must be >= 1")
    if cfg.cycle_seconds <= 0:
        err("protocol.cycle_seconds", "must be positive")

    inter = cfg.interference
    if not 0.0 <= inter.prob_per_cycle <= 1.0:
        err("interference.prob", "must lie in [0, 1]")
    if inter.multiplier < 1.0:
        err("interference.multiplier", "must be >= 1")
    if inter.affected_links < 1:
        err("interference.affected_links", "must be >= 1")
    if inter.duration_cycles < 1:
        err("interference.duration_cycles", "must be >= 1")
    if (inter.prob_per_cycle > 0 and 0 < cfg.trigger_threshold < 1
            and inter.multiplier <= 1.0 / (1.0 - cfg.trigger_threshold)):
        warn("interference.multiplier",
             "too small to ever fire the trigger at this threshold")

    if cfg.horizon < 1:
        err("run.horizon", "must be >= 1")
    if cfg.strategy not in STRATEGIES:
        err("run.strategy", f"unknown strategy {cfg.strategy!r}; "
                            f"expected one of {', '.join(STRATEGIES)}")
    for cycle, node in cfg.forced_deaths:
        if cycle < 0 or cycle >= cfg.horizon:
            err("events.forced_deaths", f"cycle {cycle} outside the horizon")
        if not 0 <= node < node_count:
            err("events.forced_deaths", f"node {node} outside the grid")

    if any(f.severity == "error" for f in findings):
        return findings

    # Connectivity and plan-time feasibility, on the actual seeded topology.
    try:
        net = netmodel.build_grid_topology(cfg.rows, cfg.cols, cfg.spacing_m,
                                           cfg.range_m, set(cfg.proxies),
                                           cfg.link_params(), cfg.seed)
    except TopologyError as exc:
        err("topology", str(exc))
        return findings
    pieces = sample_pieces(cfg, net)
    if not pieces:
        warn("data.consumer_fraction", "no pieces sampled")
        return findings
    reports = planner.status_from_network(net)
    plan = planner.compute_plan(reports, pieces, net.proxies,
                                cfg.latency_budget_ms, cfg.lifetime_params())
    for pid in sorted(plan.infeasible):
        warn("protocol.latency_budget_ms",
             f"piece {pid} has no feasible plan: {plan.infeasible[pid]}")
    return findings


def sample_pieces(cfg: ScenarioConfig, net: netmodel.NetworkState) -> list[netmodel.DataPiece]:
    """Draw the piece population for a scenario: a consumer fraction of the
    normal nodes, each fetching from a random distinct source at a random
    integer rate. Deterministic in the scenario seed."""
    import random as _random

    rng = _random.Random(f"{cfg.seed}:pieces")
    normal = sorted(u for u in net.nodes if u not in net.proxies)
    if not normal:
        return []
    k = max(1, round(cfg.consumer_fraction * len(normal)))
    k = min(k, len(normal))
    consumers = rng.sample(normal, k)
    pieces = []
    for pid, consumer in enumerate(consumers):
        candidates = [u for u in normal if u != consumer]
        source = rng.choice(candidates)
        rate = rng.randint(cfg.rate_min, cfg.rate_max)
        pieces.append(netmodel.DataPiece(id=pid, source=source, consumer=consumer,
                                         rate=rate, size_bytes=cfg.piece_size_bytes))
    return pieces


def is_valid(findings: list[Finding]) -> bool:
    return not any(f.severity == "error" for f in findings)
