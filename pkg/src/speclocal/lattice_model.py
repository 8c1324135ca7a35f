"""Periodic tight-binding Hamiltonians as Hermitian polynomials in lattice
shifts: Bloch-fiber evaluation, Fermi-point search, and linearization of
band touchings into slope matrices B with topological charges.

Fourier convention (fixed package-wide, documented in the model file
format): H_k = sum_n h_n exp(2 pi i <n, k>), with k in [0,1)^d and the
shift S_j corresponding to the offset e_j.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from speclocal.clifford import clifford_generators, clifford_trace_det

HERM_TOL = 1e-13
DEFAULT_SIGMA_TOL = 1e-9
DEDUP_RADIUS = 1e-4

# coarse-scan resolution per dimension (keys are d)
DEFAULT_GRID = {1: 256, 2: 96, 3: 48}


class ModelError(ValueError):
    """Malformed model input: duplicate offsets, bad chiral symmetry, ..."""


class FermiSearchError(RuntimeError):
    """The Fermi-point scan failed structurally (non-isolated zero set or
    refinement breakdown), as opposed to simply finding nothing."""


@dataclass(frozen=True)
class HoppingTerm:
    """One lattice hopping: offset n in Z^d with complex N x N amplitude."""

    offset: tuple
    amplitude: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(int(x) for x in self.offset))
        amp = np.array(self.amplitude, dtype=complex)
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)


@dataclass(frozen=True)
class TightBindingModel:
    d: int
    N: int
    hoppings: tuple
    chiral_symmetry: np.ndarray | None = None
    name: str = "custom"

    def fiber(self, k) -> np.ndarray:
        return bloch_fiber(self, k)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([t.offset for t in self.hoppings], dtype=int)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.hoppings], dtype=complex)


@dataclass(frozen=True)
class WeylPointReport:
    """A linearized band touching.

    B is reported per irreducible summand (only the q*=1 case constructs
    it; degenerate touchings carry B=None and are charged via the local
    topological charge instead).  residual_bound is the supremum of
    ||H^R_k|| / |k - k*|^2 over the probe ball, certifying the quadratic
    remainder of the linearization.
    """

    k_star: tuple
    multiplicity: int
    B: np.ndarray | None
    charge: int | None
    residual_bound: float
    fit_residual: float = 0.0


# ----------------------------------------------------------- construction


def model_from_hoppings(d, N, terms, chiral=None, name="custom") -> TightBindingModel:
    """Build a model, enforcing the Hermiticity closure h_{-n} = h_n^dag.

    Terms given only at offset n are mirrored to -n automatically; terms
    given at both must agree with the closure, otherwise the duplicate is
    conflicting and rejected.
    """
    table: dict[tuple, np.ndarray] = {}
    seen = set()
    for t in terms:
        if not isinstance(t, HoppingTerm):
            t = HoppingTerm(tuple(t[0]), t[1])
        n = t.offset
        if len(n) != d:
            raise ModelError(f"offset {n} has length {len(n)}, expected d={d}")
        amp = np.array(t.amplitude, dtype=complex)
        if amp.shape != (N, N):
            raise ModelError(f"amplitude at {n} has shape {amp.shape}, expected ({N},{N})")
        if n in seen:
            raise ModelError(f"duplicate offset {n}")
        seen.add(n)
        neg = tuple(-x for x in n)
        if neg in table:
            if np.max(np.abs(table[neg] - amp.conj().T)) > HERM_TOL:
                raise ModelError(
                    f"conflicting amplitudes at offsets {n} / {neg}: "
                    "Hermiticity closure h_{-n} = h_n^dag violated"
                )
            continue
        table[n] = amp
    merged = []
    for n, amp in table.items():
        neg = tuple(-x for x in n)
        if n == neg:  # zero offset: amplitude must itself be Hermitian
            if np.max(np.abs(amp - amp.conj().T)) > HERM_TOL:
                raise ModelError("on-site amplitude must be Hermitian")
            merged.append(HoppingTerm(n, amp))
        else:
            merged.append(HoppingTerm(n, amp))
            merged.append(HoppingTerm(neg, amp.conj().T))
    merged.sort(key=lambda t: t.offset)

    if chiral is not None:
        chiral = np.array(chiral, dtype=complex)
        if chiral.shape != (N, N):
            raise ModelError("chiral symmetry has wrong shape")
        eye = np.eye(N)
        if (
            np.max(np.abs(chiral - chiral.conj().T)) > HERM_TOL
            or np.max(np.abs(chiral @ chiral - eye)) > HERM_TOL
        ):
            raise ModelError("chiral symmetry must be a Hermitian unitary")

    model = TightBindingModel(
        d=d, N=N, hoppings=tuple(merged), chiral_symmetry=chiral, name=name
    )

    if chiral is not None:
        # spot-check gamma0 H_k gamma0 = -H_k on a small grid
        for k in _check_grid(d, 5):
            Hk = bloch_fiber(model, k)
            if np.max(np.abs(chiral @ Hk @ chiral + Hk)) > 1e-10:
                raise ModelError(f"chiral symmetry check failed at k={tuple(k)}")
    return model


def _check_grid(d, per_axis):
    axes = [np.arange(per_axis) / per_axis + 0.013] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def bloch_fiber(model: TightBindingModel, k) -> np.ndarray:
    """H_k = sum_n h_n exp(2 pi i <n,k>); Hermitian to machine precision."""
    k = np.asarray(k, dtype=float).reshape(model.d)
    phases = np.exp(2j * np.pi * (model.offsets @ k))
    H = np.tensordot(phases, model.amplitudes, axes=(0, 0))
    return H


def fiber_batch(model: TightBindingModel, ks) -> np.ndarray:
    """Vectorized bloch_fiber over an (m, d) array of momenta -> (m, N, N)."""
    ks = np.asarray(ks, dtype=float)
    phases = np.exp(2j * np.pi * (ks @ model.offsets.T))
    return np.tensordot(phases, model.amplitudes, axes=(1, 0))


def fiber_derivative(model: TightBindingModel, k, axis) -> np.ndarray:
    """Analytic dH_k/dk_axis = sum_n (2 pi i n_axis) h_n e^{2 pi i <n,k>}."""
    k = np.asarray(k, dtype=float).reshape(model.d)
    offs = model.offsets
    phases = 2j * np.pi * offs[:, axis] * np.exp(2j * np.pi * (offs @ k))
    return np.tensordot(phases, model.amplitudes, axes=(0, 0))


# --------------------------------------------------------------- builtins


def _require(params, *names):
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ModelError(f"missing parameter(s): {', '.join(missing)}")
    return [params[n] for n in names]


def builtin_model(name, **params) -> TightBindingModel:
    """Construct one of the named example models.

    sin_chain():             d=1, N=1, H = (S - S*)/2i, fiber sin(2 pi k)
    ssh_chain(mu):           d=1, N=2 chiral, A = S - mu
    stacked_ssh(delta, mu):  d=2, N=2 chiral, A = S_1* - 2 delta cos-shift - mu
    p_ip(delta, mu_hat):     d=2, N=2 two-band even model
    minimal_weyl(delta, mu, eta=0): d=3, N=2 Weyl semimetal

    All accept scale= (default 1) multiplying every amplitude uniformly;
    shrinking the energy scale loosens the spectral-localizer tuning bound
    without moving any Fermi point or changing any integer invariant.
    """
    scale = float(params.pop("scale", 1.0))
    known = {
        "sin_chain": (),
        "ssh_chain": ("mu",),
        "stacked_ssh": ("delta", "mu"),
        "p_ip": ("delta", "mu_hat"),
        "minimal_weyl": ("delta", "mu", "eta"),
    }
    if name not in known:
        raise ModelError(f"unknown builtin model {name!r}")
    stray = {k for k, v in params.items() if k not in known[name] and v is not None}
    if stray:
        raise ModelError(f"{name} does not take parameter(s): {', '.join(sorted(stray))}")

    lower = lambda z: np.array([[0, 0], [z, 0]], dtype=complex)  # noqa: E731

    if name == "sin_chain":
        terms = [HoppingTerm((1,), np.array([[1 / 2j]]))]
        model = model_from_hoppings(1, 1, terms, name=name)
    elif name == "ssh_chain":
        (mu,) = _require(params, "mu")
        terms = [
            HoppingTerm((0,), lower(-mu) + lower(-mu).conj().T),
            HoppingTerm((1,), lower(1.0)),
        ]
        model = model_from_hoppings(
            1, 2, terms, chiral=np.diag([1.0, -1.0]), name=name
        )
    elif name == "stacked_ssh":
        delta, mu = _require(params, "delta", "mu")
        terms = [
            HoppingTerm((0, 0), lower(-mu) + lower(-mu).conj().T),
            HoppingTerm((-1, 0), lower(1.0)),
            HoppingTerm((0, 1), lower(-delta)),
            HoppingTerm((0, -1), lower(-delta)),
        ]
        # (0,1) and (0,-1) both carry -delta in the chiral block: the pair
        # sums to the -2 delta cos(2 pi k_2) intracell modulation
        terms = _merge_chiral_pairs(terms)
        model = model_from_hoppings(
            2, 2, terms, chiral=np.diag([1.0, -1.0]), name=name
        )
    elif name == "p_ip":
        delta, mu_hat = _require(params, "delta", "mu_hat")
        s3_ = np.diag([1.0, -1.0]).astype(complex)
        terms = [
            HoppingTerm((0, 0), -mu_hat * s3_),
            HoppingTerm((1, 0), s3_ + delta * np.array([[0, 1], [-1, 0]])),
            HoppingTerm((0, 1), s3_ + delta * np.array([[0, 1j], [1j, 0]])),
        ]
        model = model_from_hoppings(2, 2, terms, name=name)
    elif name == "minimal_weyl":
        delta, mu = _require(params, "delta", "mu")
        eta = float(params.pop("eta", 0.0) or 0.0)
        s3_ = np.diag([1.0, -1.0]).astype(complex)
        eye = np.eye(2, dtype=complex)
        terms = [
            HoppingTerm((0, 0, 0), -mu * s3_),
            HoppingTerm((1, 0, 0), s3_ + delta * np.array([[0, 1], [-1, 0]]) + 1j * eta * eye),
            HoppingTerm((0, 1, 0), s3_ + delta * np.array([[0, 1j], [1j, 0]]) + 1j * eta * eye),
            HoppingTerm((0, 0, 1), s3_ + 1j * eta * eye),
        ]
        model = model_from_hoppings(3, 2, terms, name=name)

    if scale != 1.0:
        model = TightBindingModel(
            d=model.d,
            N=model.N,
            hoppings=tuple(
                HoppingTerm(t.offset, scale * t.amplitude) for t in model.hoppings
            ),
            chiral_symmetry=model.chiral_symmetry,
            name=model.name,
        )
    return model


def _merge_chiral_pairs(terms):
    # builtin helper: (0,1)/(0,-1) lower-block terms would collide with the
    # Hermiticity mirror of each other, so combine them up front
    table = {}
    for t in terms:
        if t.offset in table:
            table[t.offset] = HoppingTerm(t.offset, table[t.offset].amplitude + t.amplitude)
        else:
            table[t.offset] = t
    out = {}
    for n, t in table.items():
        neg = tuple(-x for x in n)
        if neg in out:
            out[neg] = HoppingTerm(neg, out[neg].amplitude + t.amplitude.conj().T)
        else:
            out[n] = t
    return list(out.values())


# ------------------------------------------------------ Fermi point search


def _sigma_min_grid(model, grid_per_axis):
    axes = [np.arange(grid_per_axis) / grid_per_axis] * model.d
    mesh = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=-1)
    H = fiber_batch(model, ks)
    sig = np.abs(np.linalg.eigvalsh(H)).min(axis=-1)
    return ks, sig.reshape((grid_per_axis,) * model.d)


def _local_minima_mask(sig):
    mask = np.ones_like(sig, dtype=bool)
    d = sig.ndim
    for axis in range(d):
        for shift in (1, -1):
            mask &= sig <= np.roll(sig, shift, axis=axis)
    return mask


def torus_distance(a, b):
    diff = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    diff = np.minimum(diff, 1.0 - diff)
    return float(np.linalg.norm(diff))


def _gauss_newton_refine(model, k0, tol, max_iter=60):
    """Drive sigma_min(H_k) to zero: residual r = H_k v with v the smallest
    right singular vector, Jacobian columns dH/dk_j v."""
    k = np.array(k0, dtype=float)
    sigma = np.inf
    for _ in range(max_iter):
        H = bloch_fiber(model, k)
        _, s, vh = np.linalg.svd(H)
        sigma = s[-1]
        if sigma < tol:
            return k % 1.0, float(sigma), True
        v = vh[-1].conj()
        r = H @ v
        J = np.stack(
            [fiber_derivative(model, k, j) @ v for j in range(model.d)], axis=-1
        )
        A = np.concatenate([J.real, J.imag], axis=0)
        rhs = np.concatenate([r.real, r.imag], axis=0)
        step, *_ = np.linalg.lstsq(A, -rhs, rcond=None)
        if np.linalg.norm(step) < 1e-14:
            break
        if np.linalg.norm(step) > 0.25:  # keep the iterate inside the cell
            step *= 0.25 / np.linalg.norm(step)
        k = k + step
    return k % 1.0, float(sigma), bool(sigma < tol)


def find_fermi_points(model, grid_per_axis=None, tol=DEFAULT_SIGMA_TOL):
    """Coarse sigma_min scan + Gauss-Newton refinement of grid-local minima.

    Returns a lexicographically sorted, torus-deduplicated list of points
    with refined sigma_min < tol.  Raises FermiSearchError when the zero
    set looks non-isolated (chains of accepted minima) or when a seed that
    descends below sqrt-tolerance stalls before reaching tol.
    """
    if grid_per_axis is None:
        grid_per_axis = DEFAULT_GRID.get(model.d, 32)
    if grid_per_axis < 8:
        raise ModelError("grid_per_axis must be at least 8")
    ks, sig = _sigma_min_grid(model, grid_per_axis)
    mask = _local_minima_mask(sig)

    # plateau guard: a sizable fraction of near-zero cells means the zero
    # set cannot be a finite point set
    near_zero_fraction = float(np.mean(sig < 10 * tol))
    if near_zero_fraction > 0.05:
        raise FermiSearchError(
            f"{100 * near_zero_fraction:.1f}% of grid cells have sigma_min "
            "below threshold: zero set appears non-isolated"
        )

    seeds = ks.reshape(sig.shape + (model.d,))[mask]
    accepted = []
    stalled = []
    for seed in seeds:
        k, sigma, ok = _gauss_newton_refine(model, seed, tol)
        if ok:
            accepted.append(k)
        elif sigma < np.sqrt(tol) * 1e-1:
            stalled.append((tuple(seed), sigma))
    if stalled:
        desc = "; ".join(f"seed {s} stalled at sigma={v:.2e}" for s, v in stalled)
        raise FermiSearchError(f"refinement non-convergence: {desc}")

    # torus dedup at fixed radius, earliest representative wins
    unique = []
    for k in accepted:
        if not any(torus_distance(k, u) < DEDUP_RADIUS for u in unique):
            unique.append(k)

    # chain detection: refined minima stringing along at grid spacing are
    # the signature of a zero curve, not of isolated points
    h = 1.0 / grid_per_axis
    if len(unique) > 1:
        adj = {i: set() for i in range(len(unique))}
        for i in range(len(unique)):
            for j in range(i + 1, len(unique)):
                if torus_distance(unique[i], unique[j]) < 1.5 * h:
                    adj[i].add(j)
                    adj[j].add(i)
        seen: set = set()
        for i in range(len(unique)):
            if i in seen:
                continue
            comp, stack = set(), [i]
            while stack:
                x = stack.pop()
                if x in comp:
                    continue
                comp.add(x)
                stack.extend(adj[x] - comp)
            seen |= comp
            if len(comp) > 3:
                raise FermiSearchError(
                    f"{len(comp)} refined zeros form a chain at grid spacing: "
                    "zero set appears non-isolated"
                )

    unique = [tuple(float(x % 1.0) for x in k) for k in unique]
    return sorted(unique)


# ------------------------------------------------------------ linearization


def _kernel_basis(H, tol):
    vals, vecs = np.linalg.eigh(H)
    idx = np.abs(vals) < tol
    return vecs[:, idx]


def linearize_at(model, k_star, fd_step=1e-5, probe_radius=0.02) -> WeylPointReport:
    """Linearize the band touching at k*: extract q*, the slope matrix B
    (up to the rotation gauge), and the quadratic-remainder bound.

    The kernel-restricted derivative family S_j = P dH/dk_j P determines
    B^T B through its Gram matrix and, for odd d, sgn(det B) through the
    trace of the ordered product (the trace-determinant identity); the
    reported B is the symmetric square root with that sign attached.
    """
    d = model.d
    k_star = np.asarray(k_star, dtype=float).reshape(d)
    H0 = bloch_fiber(model, k_star)
    scale = max(np.max(np.abs(np.linalg.eigvalsh(H0))), 1e-14)
    V = _kernel_basis(H0, max(1e-8, 1e-6 * scale))
    dprime = 2 ** (d // 2)
    dim_ker = V.shape[1]
    if dim_ker == 0:
        raise ModelError(f"no kernel at k*={tuple(k_star)}: not a Fermi point")
    if dim_ker % dprime:
        raise ModelError(
            f"kernel dimension {dim_ker} is not a multiple of d'={dprime}"
        )
    q_star = dim_ker // dprime

    h = max(fd_step, 1e-5)
    S = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        dH = (bloch_fiber(model, k_star + e) - bloch_fiber(model, k_star - e)) / (2 * h)
        S.append(V.conj().T @ dH @ V)

    # quadratic remainder sup ||H_k - H_{k*} - <k-k*, grad H>|| / |k-k*|^2
    residual_bound = 0.0
    rng_dirs = _probe_directions(d)
    for r in (probe_radius, probe_radius / 2):
        for u in rng_dirs:
            q = r * u
            Hq = bloch_fiber(model, k_star + q)
            lin = H0 + sum(
                q[j] * fiber_derivative(model, k_star, j) for j in range(d)
            )
            residual_bound = max(residual_bound, np.linalg.norm(Hq - lin, 2) / r**2)

    if q_star != 1:
        return WeylPointReport(
            k_star=tuple(float(x) for x in k_star),
            multiplicity=q_star,
            B=None,
            charge=None,
            residual_bound=float(residual_bound),
        )

    gram = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            gram[i, j] = np.trace(S[i] @ S[j]).real / dprime
    # fit residual: distance of the S-family from an exact Clifford frame
    # with Gram = B^T B, measured through the anticommutators
    fit = 0.0
    for i in range(d):
        for j in range(d):
            anti = S[i] @ S[j] + S[j] @ S[i] - 2 * gram[i, j] * np.eye(dprime)
            fit = max(fit, np.max(np.abs(anti)))

    evals, evecs = np.linalg.eigh(gram)
    if evals.min() <= 0:
        raise ModelError(
            f"slope Gram matrix is singular at k*={tuple(k_star)}: "
            "band touching is not linear"
        )
    sqrt_gram = evecs @ np.diag(np.sqrt(evals)) @ evecs.T

    det_sign = 0
    if d % 2 == 1:
        tr = np.trace(np.linalg.multi_dot(S)) if d > 1 else np.trace(S[0])
        pref = 2 ** ((d - 1) // 2) * 1j ** ((d - 1) // 2)
        det_val = (tr / pref).real
        det_sign = 1 if det_val > 0 else -1
        B = sqrt_gram.copy()
        if det_sign < 0:
            B[:, 0] = -B[:, 0]
        charge = int((-1) ** ((d + 1) // 2) * det_sign)
    else:
        # even d: sgn(det B) is gauge (every O(d) frame rotation is inner),
        # so the symmetric root with det > 0 is as good a representative
        # as any; charges come from the local Chern number downstream
        B = sqrt_gram
        charge = None

    return WeylPointReport(
        k_star=tuple(float(x) for x in k_star),
        multiplicity=1,
        B=B,
        charge=charge,
        residual_bound=float(residual_bound),
        fit_residual=float(fit),
    )


def _probe_directions(d):
    dirs = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        dirs.extend([e, -e])
    diag = np.ones(d) / np.sqrt(d)
    dirs.extend([diag, -diag])
    return dirs


def charge_of(report: WeylPointReport, d: int) -> int:
    """c* = (-1)^((d+1)/2) sgn(det B) for a simple odd-d touching."""
    if d % 2 == 0:
        raise ModelError(
            "charge_of applies to odd d only; even-d points are charged via "
            "the local Chern number"
        )
    if report.B is None:
        raise ModelError(
            "degenerate touching without slope matrix: use the local charge"
        )
    det = np.linalg.det(report.B)
    if det == 0:
        raise ModelError("slope matrix is singular")
    return int((-1) ** ((d + 1) // 2) * np.sign(det))


# ------------------------------------------------------------- model files


def model_to_toml(model: TightBindingModel) -> str:
    """Serialize to the documented TOML layout; floats via repr so the
    round trip is bit-exact."""
    lines = [
        "# tight-binding model file; fiber convention:",
        "# H_k = sum_n h_n exp(2 pi i <n,k>), k in [0,1)^d",
        "schema = 1",
        f"d = {model.d}",
        f"N = {model.N}",
        f'name = "{model.name}"',
        "",
    ]
    for t in model.hoppings:
        lines.append("[[hopping]]")
        lines.append(f"offset = [{', '.join(str(x) for x in t.offset)}]")
        lines.append(f"re = {_matrix_literal(t.amplitude.real)}")
        lines.append(f"im = {_matrix_literal(t.amplitude.imag)}")
        lines.append("")
    if model.chiral_symmetry is not None:
        lines.append("[chiral]")
        lines.append(f"re = {_matrix_literal(model.chiral_symmetry.real)}")
        lines.append(f"im = {_matrix_literal(model.chiral_symmetry.imag)}")
        lines.append("")
    return "\n".join(lines)


def _matrix_literal(M):
    rows = ", ".join(
        "[" + ", ".join(_float_literal(x) for x in row) + "]" for row in np.asarray(M)
    )
    return f"[{rows}]"


def _float_literal(x):
    r = repr(float(x))
    # TOML floats need a decimal point or exponent
    if "e" not in r and "." not in r and "inf" not in r and "nan" not in r:
        r += ".0"
    return r


def model_from_toml(text: str) -> TightBindingModel:
    try:
        import tomllib  # python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    data = tomllib.loads(text)
    for key in data:
        if key not in {"schema", "d", "N", "name", "hopping", "chiral"}:
            raise ModelError(f"unknown key in model file: {key!r}")
    if data.get("schema", 1) != 1:
        raise ModelError(f"unsupported model schema {data.get('schema')}")
    d, N = int(data["d"]), int(data["N"])
    terms = []
    for entry in data.get("hopping", []):
        for key in entry:
            if key not in {"offset", "re", "im"}:
                raise ModelError(f"unknown key in hopping table: {key!r}")
        terms.append(HoppingTerm(tuple(entry["offset"]), _complex_parts(entry)))
    chiral = None
    if "chiral" in data:
        for key in data["chiral"]:
            if key not in {"re", "im"}:
                raise ModelError(f"unknown key in chiral table: {key!r}")
        chiral = _complex_parts(data["chiral"])
    return model_from_hoppings(
        d, N, terms, chiral=chiral, name=data.get("name", "custom")
    )


def _complex_parts(entry):
    # assembled componentwise: re + 1j*im would flush the sign of -0.0
    # imaginary entries and break the bit-exact round trip
    re = np.array(entry["re"], dtype=float)
    out = np.empty(re.shape, dtype=complex)
    out.real = re
    out.imag = np.array(entry["im"], dtype=float)
    return out


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(model_to_toml(model))


def load_model(path) -> TightBindingModel:
    with open(path) as fh:
        return model_from_toml(fh.read())


def model_hash(model: TightBindingModel) -> str:
    """Stable content hash (first 16 hex chars of sha256 of the canonical
    serialization); stamped into exported localizer headers."""
    return hashlib.sha256(model_to_toml(model).encode()).hexdigest()[:16]
