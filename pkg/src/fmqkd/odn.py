"""Element library and topology builder for composite distribution networks.

Every passive element in a link (fiber spans, the 1xN planar splitter,
mandrel mode filters, connectors, the budget-emulation attenuator) is
described by a small immutable spec and converted into a wavelength- and
seed-dependent :class:`~fmqkd.modal.TransferOperator` by
:func:`element_transfer`.  A topology is an ordered list of elements;
:func:`chain_transfer` composes them source to receiver.

Model notes
-----------
* A span applies mode-flat attenuation, a differential group delay on
  LP11, and one lumped polarization-preserving LP01/LP11 coupling whose
  intermodal phase is linear in wavelength.  Interference between the
  coupled and direct paths at downstream mode-selective junctions is what
  produces wavelength-sensitive speckle; two guided mode groups make this
  a two-path interference rather than a full random-matrix ensemble.
* The splitter draws a seed-fixed input mixing unitary plus one coupling
  rotation per drop port.  Ports attenuate LP11 relative to LP01
  (``lp11_port_loss_db``), so a port whose LP01 projection is faded really
  loses power instead of merely reshuffling it between modes.  Summed over
  ports the device stays passive: excess loss is the only dissipation for
  LP01-pure input.
* Mandrel mode filters attenuate LP11 strongly, but a tight bend also
  couples the modes, so a filter can fold part of the incoming LP11 field
  back into LP01 (``reclaim_angle_rad``).  Placed at the end of a link this
  recovers count rate at the price of polarization distortion from the
  differently-evolved LP11 content; placed before the splitter it tames
  port speckle.  The default is a purely diagonal filter.
* Environmental drift for field-installed fiber is a random walk on each
  span's coupling angle, intermodal phase and output polarization.  The
  walk lives in explicit offset fields so that drifted topologies stay
  immutable values.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
import yaml

from .modal import (
    TransferOperator,
    mode_diag,
    polarization_block,
    random_su2,
    spatial_coupling,
    su2_rotation,
)

REFERENCE_WAVELENGTH_NM = 848.0
QUANTUM_BAND_NM = (830.0, 870.0)

# Intermodal phase slope assigned to a span when none is given, rad/pm per km
# of span length.  Calibrated so that a few-pm detuning can traverse an
# interference extremum on a km-scale drop span.
PHASE_SCALE_PER_KM = 0.9

# Scale between the coupling-angle walk and the intermodal-phase walk during
# drift: the phase is an optical path difference and moves much faster.
_PHASE_WALK_RATIO = 2.0 * math.pi


class ConfigurationError(ValueError):
    """Invalid element, topology or wavelength configuration."""


@dataclass(frozen=True)
class FiberSpan:
    """Few-mode fiber span.

    Defaults carry the short-wavelength loss of G.652 fiber (1.8 dB/km at
    848 nm) and its differential mode delay (2.02 ns/km).  LP11 rides close
    to cut-off and leaks faster than LP01 (``lp11_excess_db_per_km``).
    """

    length_km: float
    loss_db_per_km: float = 1.8
    dmd_ns_per_km: float = 2.02
    coupling_strength: float = 0.0
    intermodal_phase_scale: float | None = None  # rad/pm; default scales with length
    lp11_excess_db_per_km: float = 0.0
    pol_decorrelation: float = 1.0  # 0: both modes share one SOP rotation
    # Drift bookkeeping (radians); zero for pristine topologies.
    coupling_offset_rad: float = 0.0
    phase_offset_rad: float = 0.0
    sop_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.length_km < 0:
            raise ConfigurationError("span length must be >= 0")
        if self.loss_db_per_km < 0 or self.lp11_excess_db_per_km < 0:
            raise ConfigurationError("span losses must be >= 0")
        if not 0.0 <= self.coupling_strength <= 1.0:
            raise ConfigurationError("coupling_strength must be in [0, 1]")
        if not 0.0 <= self.pol_decorrelation <= 1.0:
            raise ConfigurationError("pol_decorrelation must be in [0, 1]")

    @property
    def phase_scale(self) -> float:
        if self.intermodal_phase_scale is not None:
            return self.intermodal_phase_scale
        return PHASE_SCALE_PER_KM * self.length_km


@dataclass(frozen=True)
class Splitter:
    """1xN planar-lightwave-circuit power splitter with speckle-selective ports."""

    num_ports: int = 4
    excess_loss_db: float = 1.0
    speckle_seed: int = 0
    lp11_port_loss_db: float = 14.0  # junction mode selectivity, calibrated

    def __post_init__(self):
        if self.num_ports < 2:
            raise ConfigurationError("splitter needs at least 2 ports")
        if self.excess_loss_db < 0 or self.lp11_port_loss_db < 0:
            raise ConfigurationError("splitter losses must be >= 0")

    @property
    def nominal_split_db(self) -> float:
        return 10.0 * math.log10(self.num_ports)


@dataclass(frozen=True)
class ModeFilter:
    """Mandrel-wrap mode filter (fiber loops on a small drum).

    ``reclaim_angle_rad``/``reclaim_phase_rad`` describe the bend-induced
    mode coupling that folds part of the incoming LP11 field back into
    LP01 before the differential attenuation acts; a phase of ``None``
    draws it from the chain seed.
    """

    lp11_extinction_db: float = 20.0
    lp01_insertion_loss_db: float = 0.2
    reclaim_angle_rad: float = 0.0
    reclaim_phase_rad: float | None = None

    def __post_init__(self):
        if self.lp11_extinction_db < 0 or self.lp01_insertion_loss_db < 0:
            raise ConfigurationError("filter losses must be >= 0")


@dataclass(frozen=True)
class Connector:
    """Fiber-optic joint: small insertion loss plus weak mode mixing."""

    insertion_loss_db: float = 0.15
    mixing_angle_rad: float = 0.05

    def __post_init__(self):
        if self.insertion_loss_db < 0:
            raise ConfigurationError("connector loss must be >= 0")


@dataclass(frozen=True)
class Attenuator:
    """Mode-flat attenuator used to emulate the optical budget."""

    loss_db: float = 0.0

    def __post_init__(self):
        if self.loss_db < 0:
            raise ConfigurationError("attenuation must be >= 0")


ElementSpec = Union[FiberSpan, Splitter, ModeFilter, Connector, Attenuator]

_ELEMENT_TYPES = {
    "fiber_span": FiberSpan,
    "splitter": Splitter,
    "mode_filter": ModeFilter,
    "connector": Connector,
    "attenuator": Attenuator,
}


@dataclass(frozen=True)
class ODNTopology:
    """Ordered element list from the transmitter side to the receiver side."""

    elements: tuple[ElementSpec, ...]
    selected_port: int = 0
    label: str = ""

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        splitters = [e for e in elements if isinstance(e, Splitter)]
        if len(splitters) > 1:
            raise ConfigurationError("at most one splitter per topology")
        if splitters and not 0 <= self.selected_port < splitters[0].num_ports:
            raise ConfigurationError(
                f"selected_port {self.selected_port} out of range for "
                f"{splitters[0].num_ports}-port splitter")

    @property
    def splitter(self) -> Splitter | None:
        for e in self.elements:
            if isinstance(e, Splitter):
                return e
        return None

    def with_port(self, port: int) -> "ODNTopology":
        return replace(self, selected_port=port)

    def nominal_loss_db(self) -> float:
        """Intended LP01 path loss: span/filter/connector losses plus the
        nominal split ratio and excess loss.  Excludes speckle fading."""
        total = 0.0
        for e in self.elements:
            if isinstance(e, FiberSpan):
                total += e.loss_db_per_km * e.length_km
            elif isinstance(e, Splitter):
                total += e.nominal_split_db + e.excess_loss_db
            elif isinstance(e, ModeFilter):
                total += e.lp01_insertion_loss_db
            elif isinstance(e, Connector):
                total += e.insertion_loss_db
            elif isinstance(e, Attenuator):
                total += e.loss_db
        return total


@dataclass(frozen=True)
class DriftParams:
    """Random-walk rates for environmentally perturbed fiber."""

    profile: str = "LAB"
    sop_rotation_rate: float = 0.0     # rad / sqrt(s)
    coupling_walk_rate: float = 0.0    # rad / sqrt(s) on the coupling angle

    def __post_init__(self):
        if self.sop_rotation_rate < 0 or self.coupling_walk_rate < 0:
            raise ConfigurationError("drift rates must be >= 0")
        if self.profile == "LAB" and (self.sop_rotation_rate or self.coupling_walk_rate):
            raise ConfigurationError("LAB profile must have zero drift rates")

    @classmethod
    def lab(cls) -> "DriftParams":
        return cls("LAB", 0.0, 0.0)

    @classmethod
    def kos(cls) -> "DriftParams":
        # In-door office loop: slow, stable drift.
        return cls("KOS", 1.0e-3, 4.0e-4)

    @classmethod
    def roof(cls) -> "DriftParams":
        # Roof-top duct exposed to weather: markedly faster walk.
        return cls("ROOF", 2.0e-3, 8.0e-4)


# ---------------------------------------------------------------------------
# Element -> operator
# ---------------------------------------------------------------------------

def _check_wavelength(wavelength_nm: float):
    lo, hi = QUANTUM_BAND_NM
    if not lo <= wavelength_nm <= hi:
        raise ConfigurationError(
            f"wavelength {wavelength_nm} nm outside quantum band [{lo}, {hi}] nm")


def _span_transfer(e: FiberSpan, wavelength_nm: float, rng: np.random.Generator) -> TransferOperator:
    detuning_pm = (wavelength_nm - REFERENCE_WAVELENGTH_NM) * 1e3
    theta = e.coupling_strength * (math.pi / 2.0) * rng.uniform(-1.0, 1.0)
    phi0 = rng.uniform(-math.pi, math.pi)
    j01 = random_su2(rng)
    # The two modes see birefringence that decorrelates with length; a short
    # patchcord leaves both polarizations nearly aligned.
    walk = e.pol_decorrelation * (math.pi / 2.0) * rng.normal(size=3)
    j11 = j01 @ su2_rotation(*walk)
    theta += e.coupling_offset_rad
    phi = phi0 + e.phase_scale * detuning_pm + e.phase_offset_rad

    t = 10.0 ** (-e.loss_db_per_km * e.length_km / 20.0)
    t11 = t * 10.0 ** (-e.lp11_excess_db_per_km * e.length_km / 20.0)
    sop = su2_rotation(*e.sop_offset)
    matrix = (
        mode_diag(t, t11)
        @ polarization_block(sop @ j01, sop @ j11)
        @ spatial_coupling(theta, phi)
    )
    delay_inc = np.array([0.0, e.dmd_ns_per_km * e.length_km * 1e-9])
    return TransferOperator(matrix, delay_inc)


def splitter_port_matrices(e: Splitter) -> list[np.ndarray]:
    """All per-port 4x4 matrices of a splitter, drawn from its speckle seed.

    Each drop port accepts the fundamental mode at the even nominal split
    plus a seed-fixed admixture of the incoming higher-order field whose
    phase advances port to port on a discrete-Fourier grid, so the phases
    stay mutually orthogonal and the device is exactly passive: a pure
    LP01 launch sees precisely the nominal split plus excess loss on every
    port, while any LP11 content interferes port-selectively.  The LP11
    remnant forwarded into the drop fiber is attenuated by the junction
    selectivity (``lp11_port_loss_db``).
    """
    rng = np.random.default_rng(e.speckle_seed)
    kappa = rng.uniform(0.30, 0.95)          # higher-order admixture magnitude
    chi = rng.uniform(-math.pi, math.pi)     # global interference offset
    # centimeter-scale planar waveguides: negligible differential
    # birefringence between the mode fields
    j01 = random_su2(rng)
    j11 = j01
    j_rem = random_su2(rng)

    n = e.num_ports
    t_ex = 10.0 ** (-e.excess_loss_db / 10.0)
    amp = math.sqrt(t_ex / n)
    g11 = 10.0 ** (-e.lp11_port_loss_db / 20.0)
    # column budget of the stacked isometry: kappa^2 + g11^2 <= 1 / t_ex
    budget = 1.0 / t_ex - kappa * kappa
    g11 = min(g11, math.sqrt(max(budget, 0.0)))

    matrices = []
    for p in range(n):
        omega = cmath.exp(1j * (2.0 * math.pi * p / n + chi))
        m = np.zeros((4, 4), dtype=np.complex128)
        m[:2, :2] = amp * j01
        m[:2, 2:] = amp * kappa * omega * j11
        m[2:, 2:] = amp * g11 * np.conj(omega) * j_rem
        matrices.append(m)
    return matrices


def element_transfer(e: ElementSpec, wavelength_nm: float, rng_seed,
                     selected_port: int = 0) -> TransferOperator:
    """Operator of one element at one wavelength, deterministic per seed."""
    _check_wavelength(wavelength_nm)
    if isinstance(e, FiberSpan):
        return _span_transfer(e, wavelength_nm, np.random.default_rng(rng_seed))
    if isinstance(e, Splitter):
        matrices = splitter_port_matrices(e)
        return TransferOperator(matrices[selected_port], np.zeros(2))
    if isinstance(e, ModeFilter):
        rng = np.random.default_rng(rng_seed)
        phi_r = rng.uniform(-math.pi, math.pi)
        if e.reclaim_phase_rad is not None:
            phi_r = e.reclaim_phase_rad
        t01 = 10.0 ** (-e.lp01_insertion_loss_db / 20.0)
        t11 = t01 * 10.0 ** (-e.lp11_extinction_db / 20.0)
        matrix = mode_diag(t01, t11) @ spatial_coupling(e.reclaim_angle_rad, phi_r)
        return TransferOperator(matrix, np.zeros(2))
    if isinstance(e, Connector):
        rng = np.random.default_rng(rng_seed)
        phi_c = rng.uniform(-math.pi, math.pi)
        t = 10.0 ** (-e.insertion_loss_db / 20.0)
        return TransferOperator(t * spatial_coupling(e.mixing_angle_rad, phi_c), np.zeros(2))
    if isinstance(e, Attenuator):
        if e.loss_db == 0.0:
            return TransferOperator.identity()
        return TransferOperator.from_loss_db(e.loss_db)
    raise ConfigurationError(f"unknown element type {type(e).__name__}")


def chain_transfer(topology: ODNTopology, wavelength_nm: float, rng_seed) -> TransferOperator:
    """Left-to-right composition of all element operators.

    Per-element randomness derives from ``rng_seed`` and the element index,
    except the splitter, which draws only from its own ``speckle_seed``.
    """
    if not isinstance(rng_seed, np.random.SeedSequence):
        rng_seed = np.random.SeedSequence(rng_seed)
    op = TransferOperator.identity()
    from .modal import compose
    for i, e in enumerate(topology.elements):
        # Stateless child derivation: spawn() would mutate the parent and
        # make repeated calls disagree.
        child = np.random.SeedSequence(entropy=rng_seed.entropy,
                                       spawn_key=rng_seed.spawn_key + (i,))
        op = compose(element_transfer(e, wavelength_nm, child,
                                      selected_port=topology.selected_port), op)
    return op


def port_transmission_sweep(topology: ODNTopology, wavelength_lo_nm: float,
                            wavelength_hi_nm: float, step_pm: float,
                            rng_seed) -> list[tuple[float, int, float]]:
    """LP01-detected power transmission per port versus wavelength.

    Launch is pure LP01, averaged over H and V.  Returns rows of
    (wavelength_nm, port, transmission_db).
    """
    splitter = topology.splitter
    if splitter is None:
        raise ConfigurationError("port sweep requires a splitter in the topology")
    if step_pm <= 0:
        raise ConfigurationError("step must be > 0")
    wavelengths = np.arange(wavelength_lo_nm, wavelength_hi_nm + 1e-9, step_pm * 1e-3)
    launches = (np.array([1, 0, 0, 0], dtype=np.complex128),
                np.array([0, 1, 0, 0], dtype=np.complex128))
    rows = []
    for wl in wavelengths:
        for port in range(splitter.num_ports):
            op = chain_transfer(topology.with_port(port), float(wl), rng_seed)
            power = 0.0
            for vec in launches:
                out = op.matrix @ vec
                power += float(np.sum(np.abs(out[:2]) ** 2)) / len(launches)
            rows.append((float(wl), port, 10.0 * math.log10(max(power, 1e-300))))
    return rows


def drift_step(topology: ODNTopology, params: DriftParams, dt: float,
               rng: np.random.Generator) -> ODNTopology:
    """One environmental random-walk step over all fiber spans.

    Increments are zero-mean Gaussians with variance rate^2 * dt.  The LAB
    profile returns the input unchanged.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be > 0")
    if params.profile == "LAB":
        return topology
    sigma_theta = params.coupling_walk_rate * math.sqrt(dt)
    sigma_phi = sigma_theta * _PHASE_WALK_RATIO
    sigma_sop = params.sop_rotation_rate * math.sqrt(dt)
    new_elements = []
    for e in topology.elements:
        if isinstance(e, FiberSpan):
            sop = tuple(np.array(e.sop_offset) + rng.normal(0.0, sigma_sop, 3))
            e = replace(
                e,
                coupling_offset_rad=e.coupling_offset_rad + rng.normal(0.0, sigma_theta),
                phase_offset_rad=e.phase_offset_rad + rng.normal(0.0, sigma_phi),
                sop_offset=sop,
            )
        new_elements.append(e)
    return replace(topology, elements=tuple(new_elements))


# ---------------------------------------------------------------------------
# Scenario presets and config files
# ---------------------------------------------------------------------------

# Calibrated preset building blocks.  The launch patchcord is short enough
# that both modes keep nearly aligned polarizations; the drop span carries
# the bulk of the modal churn.  Filter strengths, reclaim settings, splitter
# realizations and ports are one-time calibrated against the reference
# operating points and then locked.
PATCH_SPAN = FiberSpan(length_km=0.005, coupling_strength=0.30,
                       pol_decorrelation=0.06)
DROP_SPAN = FiberSpan(length_km=1.0, coupling_strength=0.35,
                      lp11_excess_db_per_km=2.5)
M1_FILTER = ModeFilter(lp11_extinction_db=3.0, lp01_insertion_loss_db=0.2)
M2_STRAIGHT = ModeFilter(lp11_extinction_db=20.0, lp01_insertion_loss_db=0.2,
                         reclaim_angle_rad=0.60, reclaim_phase_rad=4.20)
M2_TREE = ModeFilter(lp11_extinction_db=20.0, lp01_insertion_loss_db=0.2,
                     reclaim_angle_rad=0.75, reclaim_phase_rad=1.60)
M2_FIELD = ModeFilter(lp11_extinction_db=20.0, lp01_insertion_loss_db=0.2,
                      reclaim_angle_rad=0.50, reclaim_phase_rad=2.40)
_CONN = Connector()
_TREE_SPECKLE_SEED = 1926
_TREE_PORT = 1


def _field_segments(total_km: float, n_segments: int, connector_loss_db: float):
    seg = FiberSpan(length_km=total_km / n_segments, coupling_strength=0.30,
                    lp11_excess_db_per_km=2.5)
    out = []
    for i in range(n_segments):
        out.append(seg)
        if i < n_segments - 1:
            out.append(Connector(insertion_loss_db=connector_loss_db,
                                 mixing_angle_rad=0.08))
    return out


def scenario_straight_line() -> ODNTopology:
    """1 km drop span terminated by the output mode filter."""
    return ODNTopology((_CONN, DROP_SPAN, _CONN, M2_STRAIGHT),
                       label="1-straight-line")


def scenario_colorless() -> ODNTopology:
    """Splitter distribution with the filter at the splitter only (no M2)."""
    return ODNTopology(
        (_CONN, PATCH_SPAN, M1_FILTER, Splitter(speckle_seed=_TREE_SPECKLE_SEED),
         _CONN, DROP_SPAN, _CONN),
        selected_port=_TREE_PORT, label="2-colorless")


def scenario_tree() -> ODNTopology:
    """Splitter distribution with filters at both locations."""
    return ODNTopology(
        scenario_colorless().elements + (M2_TREE,),
        selected_port=_TREE_PORT, label="3-tree")


def scenario_coexistence() -> ODNTopology:
    """Same plant as the tree scenario; classical channels are enabled at run time."""
    return replace(scenario_tree(), label="4-coexistence")


def scenario_field(profile: str = "KOS") -> ODNTopology:
    """Field-installed loops replacing the lab drop span (no M1).

    Each preset carries its own splitter realization: reinstalling the
    plant and re-optimizing the launch changes the speckle state.
    """
    if profile == "KOS":
        segments = _field_segments(0.270, 6, connector_loss_db=0.95)
        elements = (_CONN, PATCH_SPAN, Splitter(speckle_seed=403),
                    _CONN, *segments, M2_FIELD)
        return ODNTopology(elements, selected_port=2, label="5-field-kos")
    if profile == "ROOF":
        segments = _field_segments(0.692, 12, connector_loss_db=0.95)
        elements = (_CONN, PATCH_SPAN, Splitter(speckle_seed=505),
                    _CONN, *segments, M2_FIELD)
        return ODNTopology(elements, selected_port=1, label="5-field-roof")
    raise ConfigurationError(f"unknown field profile {profile!r}")


def drop_mode_filter(topology: ODNTopology, location: str) -> ODNTopology:
    """Topology with one mode filter removed, for placement studies.

    ``location`` is "m1" (the filter ahead of the splitter) or "m2" (the
    last filter of the chain).
    """
    elements = list(topology.elements)
    split_idx = next((i for i, e in enumerate(elements) if isinstance(e, Splitter)),
                     -1)
    if location == "m1":
        if split_idx < 0:
            raise ConfigurationError("no splitter, so no m1 location")
        idx = next((i for i, e in enumerate(elements)
                    if isinstance(e, ModeFilter) and i < split_idx), None)
    elif location == "m2":
        idx = next((i for i in reversed(range(len(elements)))
                    if isinstance(elements[i], ModeFilter) and i > split_idx), None)
    else:
        raise ConfigurationError("location must be 'm1' or 'm2'")
    if idx is None:
        raise ConfigurationError(f"no {location} filter in topology")
    del elements[idx]
    return replace(topology, elements=tuple(elements),
                   label=topology.label + f"-no-{location}")


def scenario_preset(name: str) -> tuple[ODNTopology, DriftParams]:
    """Named scenario plus its drift profile."""
    table = {
        "1": (scenario_straight_line, DriftParams.lab),
        "2": (scenario_colorless, DriftParams.lab),
        "3": (scenario_tree, DriftParams.lab),
        "4": (scenario_coexistence, DriftParams.lab),
        "5": (lambda: scenario_field("KOS"), DriftParams.kos),
        "5-roof": (lambda: scenario_field("ROOF"), DriftParams.roof),
    }
    key = str(name).lower()
    aliases = {
        "1-straight-line": "1", "straight-line": "1",
        "2-colorless": "2", "colorless": "2",
        "3-tree": "3", "tree": "3",
        "4-coexistence": "4", "coexistence": "4",
        "5-field-kos": "5", "field-kos": "5", "kos": "5",
        "5-field-roof": "5-roof", "field-roof": "5-roof", "roof": "5-roof",
    }
    key = aliases.get(key, key)
    if key not in table:
        raise ConfigurationError(f"unknown scenario preset {name!r}")
    topo_fn, drift_fn = table[key]
    return topo_fn(), drift_fn()


def preset_names() -> list[str]:
    return ["1", "2", "3", "4", "5", "5-roof"]


def element_to_dict(e: ElementSpec) -> dict:
    tag = {FiberSpan: "fiber_span", Splitter: "splitter", ModeFilter: "mode_filter",
           Connector: "connector", Attenuator: "attenuator"}[type(e)]
    d = {"type": tag}
    for name in e.__dataclass_fields__:
        value = getattr(e, name)
        if isinstance(value, tuple):
            value = list(value)
        d[name] = value
    return d


def element_from_dict(d: dict) -> ElementSpec:
    d = dict(d)
    tag = d.pop("type", None)
    if tag not in _ELEMENT_TYPES:
        raise ConfigurationError(f"unknown element type tag {tag!r}")
    cls = _ELEMENT_TYPES[tag]
    if "sop_offset" in d and isinstance(d["sop_offset"], list):
        d["sop_offset"] = tuple(d["sop_offset"])
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigurationError(f"bad {tag} fields: {exc}") from exc


def topology_to_dict(t: ODNTopology) -> dict:
    return {
        "label": t.label,
        "selected_port": t.selected_port,
        "elements": [element_to_dict(e) for e in t.elements],
    }


def topology_from_dict(d: dict) -> ODNTopology:
    try:
        elements = tuple(element_from_dict(e) for e in d.get("elements", []))
    except AttributeError as exc:
        raise ConfigurationError(f"malformed topology document: {exc}") from exc
    return ODNTopology(elements, selected_port=int(d.get("selected_port", 0)),
                       label=str(d.get("label", "")))


def load_topology(path) -> ODNTopology:
    """Load one scenario from a YAML document (keys mirror the element specs)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        raise ConfigurationError(f"empty topology file {path}")
    return topology_from_dict(doc)


def save_topology(t: ODNTopology, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(topology_to_dict(t), fh, sort_keys=False)
