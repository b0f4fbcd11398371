from dataclasses import dataclass, field

import numpy as np

from src.builders import optimizer_builder, state_builder, witness_builder
from src.core import bilin, catalog, edge, rankopt, witness
from src.core.bilin import PureState
from src.core.exceptions import CertificationError, NumericalError, SearchError, ValidationError
from src.utils import interchange, util
from src.utils.util import log

# failures inside a sweep widen the bounds instead of aborting
SWEEP_ERRORS = (SearchError, NumericalError, CertificationError)


@dataclass(frozen=True)
class SchmidtNumberBounds:
    lower: int
    upper: int
    m: int
    lower_certificate: dict = field(default_factory=dict)
    upper_certificate: dict = field(default_factory=dict)
    telemetry: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.lower <= self.upper <= self.m:
            raise NumericalError('inconsistent Schmidt number bounds [{}, {}] for m = {}'.format(
                self.lower, self.upper, self.m))
        if self.lower >= 2 and self.lower_certificate.get('value', 0.0) >= 0:
            raise NumericalError('lower bound {} lacks a violated witness'.format(self.lower))
        if self.upper < self.m and not self.upper_certificate:
            raise NumericalError('upper bound {} lacks a decomposition'.format(self.upper))

    def to_dict(self):
        return {
            'lower': self.lower,
            'upper': self.upper,
            'lower_certificate': interchange.plain(self.lower_certificate),
            'upper_certificate': interchange.plain(self.upper_certificate),
        }


class BaseEngine(object):

    def __init__(self, config_name='default', seed=None, restarts=None, tol=None):
        # assign configurations
        config = util.load_config(config_name)
        self.config_name = config_name
        self.cfg = optimizer_builder.build_config(config, seed=seed, restarts=restarts, tol=tol)
        self.tolerances = config.get('tolerances') or {}
        self.witness_config = config.get('witness') or {}
        self.edge_config = config.get('edge') or {}
        self.catalog_config = config.get('catalog') or {}

        # detection threshold on Tr(W rho)
        self.detection_tol = float(self.tolerances.get('detection', 1e-9))

    def report(self, command, **body):
        body['command'] = command
        body['optimizer'] = self.cfg.to_dict()
        return interchange.plain(body)

    def load_state(self, source, params=None):
        return state_builder.build(source, params, self.catalog_config)

    def classify(self, source, k_max=None):
        raise NotImplementedError

    def conjecture_scan(self):
        raise NotImplementedError


class Engine(BaseEngine):

    def __init__(self, config_name='default', seed=None, restarts=None, tol=None):
        super(Engine, self).__init__(config_name, seed, restarts, tol)
        self.max_rounds = int(self.witness_config.get('max_rounds', rankopt.MAX_ROUNDS))
        self.eta = float(self.edge_config.get('eta', edge.DEFAULT_ETA))
        self.perturb_restarts = int(self.edge_config.get('perturb_restarts', edge.PERTURB_RESTARTS))

    # Classification
    # ==============

    def classify(self, source, k_max=None):
        state, _ = self.load_state(source)
        bounds, facts = self.bounds(state, k_max)
        return self.report('classify', dims=state.dims.as_list(), bounds=bounds.to_dict(),
                           telemetry=bounds.telemetry, **facts)

    def bounds(self, state, k_max=None):
        """Schmidt number interval of `state`, cheapest certificates first."""
        dims = state.dims
        m = dims.m
        k_max = m if k_max is None else int(k_max)
        if not 1 <= k_max <= m:
            raise ValidationError('k_max must lie in [1, {}], got {}'.format(m, k_max))

        ppt, min_pt_eigenvalue = bilin.is_ppt(state)
        facts = {'ppt': ppt, 'min_pt_eigenvalue': min_pt_eigenvalue}
        lower, lower_cert = 1, {}
        upper, upper_cert = m, {}
        telemetry = {'warnings': [], 'sweep': []}

        def raise_lower(k, w, stage):
            nonlocal lower, lower_cert
            value = witness.evaluate(w, state)
            telemetry['sweep'].append({'stage': stage, 'k': k, 'value': value})
            if value < -self.detection_tol and k > lower:
                lower = k
                lower_cert = {'type': stage, 'k': k, 'value': value, 'provenance': w.provenance}
                if w.certification is not None:
                    lower_cert['certification'] = w.certification.to_dict()
                log.infov('Lower bound {} from {} witness (value {:.6f})'.format(k, stage, value))

        def tighten_upper(components, stage, **extra):
            nonlocal upper, upper_cert
            ranks = [bilin.tail_rank(c[1].amplitudes, dims) for c in components] or [1]
            bound = max(max(ranks), 1)
            if bound < upper or (bound == upper and not upper_cert):
                upper = bound
                upper_cert = dict({'type': stage, 'components': len(components), 'max_rank': bound}, **extra)
                log.infov('Upper bound {} from {}'.format(bound, stage))

        # PPT facts
        if not ppt and k_max >= 2:
            raise_lower(2, witness.partial_transpose_witness(state, self.cfg), 'partial_transpose')

        # closed-form witnesses
        data = bilin.spectral(state)
        if data.rank == 1:
            psi = PureState.from_vector(data.range_basis[:, 0], dims)
            tighten_upper([(1.0, psi)], 'pure_state')
        if dims.m == dims.n:
            for k in range(k_max, max(lower, 1), -1):
                raise_lower(k, witness.isotropic_witness(m, k, self.cfg), 'isotropic')
                if lower == k:
                    break
        leading = PureState.from_vector(data.eigenvectors[:, 0], dims)
        for k in range(k_max, max(lower, 1), -1):
            try:
                w = witness.fidelity_witness(leading, k, self.cfg)
            except (ValidationError, CertificationError):
                continue
            raise_lower(k, w, 'fidelity')
            if lower == k:
                break

        # states diagonal in the computational product basis
        matrix = np.asarray(state.entries)
        if lower < upper and bilin.max_abs(matrix - np.diag(np.diag(matrix))) <= bilin.HERMITIAN_TOL:
            weights = np.diag(matrix).real
            components = [(weights[i], bilin.basis_state(i // dims.n, i % dims.n, dims))
                          for i in range(dims.total) if weights[i] > bilin.PSD_TOL]
            tighten_upper(components, 'product_basis')

        # rank-4 PPT states on 3 x 3
        if lower < upper and ppt and (dims.m, dims.n) == (3, 3) and data.rank == 4:
            try:
                certificate = edge.rank4_schmidt2(state, self.cfg)
                tighten_upper(certificate.components, 'rank4_schmidt2',
                              reconstruction_error=certificate.reconstruction_error)
            except SWEEP_ERRORS as e:
                telemetry['warnings'].append('rank4_schmidt2: {}'.format(e))
                log.warning('Rank-4 certificate failed, bounds widened: {}'.format(e))

        # edge decompositions, witnesses built on their remainders
        for k in range(2, k_max + 1):
            if lower >= upper:
                break
            try:
                decomposition = edge.edge_decompose(state, k, self.cfg)
            except SWEEP_ERRORS as e:
                telemetry['warnings'].append('edge_decompose k={}: {}'.format(k, e))
                log.warning('Edge decomposition for k={} failed, bounds widened: {}'.format(k, e))
                continue
            if decomposition.fully_decomposed:
                tighten_upper(decomposition.components, 'edge_decompose',
                              k=k, reconstruction_error=decomposition.reconstruction_error)
                break
            if k <= lower:
                continue
            try:
                w = witness.witness_from_edge(decomposition.edge_state, k, cfg=self.cfg)
            except SWEEP_ERRORS as e:
                telemetry['warnings'].append('witness_from_edge k={}: {}'.format(k, e))
                log.warning('Edge witness for k={} failed, bounds widened: {}'.format(k, e))
                continue
            raise_lower(k, w, 'from_edge')

        if lower > upper:
            # a warning-level search result contradicted a certificate
            log.warning('Lower bound {} exceeds upper bound {}, dropping the upper bound'.format(lower, upper))
            telemetry['warnings'].append('upper bound {} dropped'.format(upper))
            upper, upper_cert = m, {}

        bounds = SchmidtNumberBounds(lower=lower, upper=upper, m=m, lower_certificate=lower_cert,
                                     upper_certificate=upper_cert, telemetry=telemetry)
        log.infov('Schmidt number bounds: [{}, {}]'.format(lower, upper))
        return bounds, facts

    # Witnesses
    # =========

    def witness_isotropic(self, m, k):
        w = witness_builder.build({'name': 'isotropic', 'm': m, 'k': k}, self.cfg)
        return w, self.report('witness isotropic', witness=interchange.encode_witness(w),
                              eigenvalues=sorted(float(v) for v in w.eigenvalues))

    def witness_from_edge(self, source, k):
        state, _ = self.load_state(source)
        w = witness_builder.build({'name': 'from_edge', 'k': k}, self.cfg, state)
        return w, self.report('witness from-edge', witness=interchange.encode_witness(w),
                              value=witness.evaluate(w, state))

    def witness_optimize(self, witness_path):
        w = witness_builder.build({'name': 'file', 'path': witness_path}, self.cfg)
        optimized = rankopt.optimize_witness(w, self.cfg, max_rounds=self.max_rounds)
        body = {'witness': interchange.encode_witness(optimized)}
        body.update(optimized.telemetry or {})
        return optimized, self.report('witness optimize', **body)

    def witness_evaluate(self, witness_path, source):
        w = witness_builder.build({'name': 'file', 'path': witness_path}, self.cfg)
        state, _ = self.load_state(source)
        value = witness.evaluate(w, state)
        return value, self.report('witness evaluate', value=value, k=w.k, detected=value < -self.detection_tol)

    # Edge states
    # ===========

    def edge_decompose(self, source, k, ppt=False):
        state, _ = self.load_state(source)
        if ppt:
            decomposition = edge.extract_ppt_edge(state, self.cfg)
        else:
            decomposition = edge.edge_decompose(state, k, self.cfg)
        return decomposition, self.report('edge decompose', decomposition=interchange.encode_decomposition(decomposition))

    def edge_rank4(self, source):
        state, _ = self.load_state(source)
        certificate = edge.rank4_schmidt2(state, self.cfg)
        return certificate, self.report('edge rank4', certificate=interchange.encode_certificate(certificate))

    def edge_perturb(self, source, target=(7, 7), eta=None):
        state, _ = self.load_state(source)
        eta = self.eta if eta is None else float(eta)
        perturbation = edge.perturb_ranks(state, tuple(target), self.cfg, eta=eta, restarts=self.perturb_restarts)
        body = perturbation.to_dict()
        body['state'] = interchange.encode_state(perturbation.state)
        return perturbation, self.report('edge perturb', perturbation=body)

    # Catalog
    # =======

    def catalog_list(self):
        entries = []
        for name in catalog.CATALOG:
            entry = catalog.build_entry(name, **dict(self.catalog_config.get(name) or {}))
            entries.append({'name': name, 'parameters': entry.parameters, 'expected': entry.expected.to_dict(),
                            'flags': entry.flags})
        return self.report('catalog list', entries=entries)

    def catalog_emit(self, name, params=None):
        _, entry = self.load_state('catalog:' + name, params)
        return entry, interchange.encode_state(entry.state)

    # Conjecture evidence
    # ===================

    def scan_entries(self):
        entries = self.catalog_config.get('scan')
        if not entries:
            entries = [{'name': 'tiles'}, {'name': 'chessboard'}, {'name': 'alpha', 'alpha': 4.0},
                       {'name': 'choi'}, {'name': 'horodecki', 'a': 0.5}]
        return entries

    def conjecture_scan(self):
        rows = []
        for params in self.scan_entries():
            params = dict(params)
            name = params.pop('name')
            rows.append(self._scan_row(name, params))
        found = sum(1 for row in rows if row.get('schmidt2_certificate') or row.get('psi2_found'))
        log.infov('Conjecture scan: {}/{} entries with Schmidt-two evidence'.format(found, len(rows)))
        return self.report('conjecture scan', rows=rows)

    def _scan_row(self, name, params):
        row = {'family': name, 'parameters': params}
        try:
            entry = catalog.build_entry(name, **params)
            row['parameters'] = entry.parameters
            ppt, _ = bilin.is_ppt(entry.state)
            if not ppt:
                row['error'] = 'state is not PPT'
                return row

            decomposition = edge.extract_ppt_edge(entry.state, self.cfg)
            row['edge_weight'] = decomposition.p
            if decomposition.fully_decomposed:
                row['error'] = 'fully decomposed into product vectors'
                return row
            delta = decomposition.edge_state
            r, r_t = bilin.pt_ranks(delta)
            row['ranks'] = [r, r_t]
            row['l_count'] = edge.lemma4_count(r, r_t)

            w = witness.ppt_edge_witness(delta, self.cfg)
            row['witness_value'] = witness.evaluate(w, delta)

            result = edge.lemma4_search(delta, self.cfg)
            row['psi2_found'] = result.found
            row['lemma4'] = result.to_dict()

            row['schmidt2_certificate'] = False
            if r == 4:
                certificate = edge.rank4_schmidt2(delta, self.cfg)
                row['schmidt2_certificate'] = True
                row['reconstruction_error'] = certificate.reconstruction_error
        except (SWEEP_ERRORS + (ValidationError,)) as e:
            log.warning('Scan of {} failed: {}'.format(name, e))
            row['error'] = str(e)
        return row
