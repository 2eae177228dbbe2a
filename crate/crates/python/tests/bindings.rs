use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let m = PyModule::new(py, "affine_regime").unwrap();
        affine_regime_py::register(&m).unwrap();
        let locals = PyDict::new(py);
        locals.set_item("ar", m).unwrap();
        if let Err(e) = py.run(code, Some(&locals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn classify_three_regimes() {
    with_module(
        c"
eye = [[1.0, 0.0], [0.0, 1.0]]
drift = ar.Drift.constant([[-1.0, 0.5], [0.0, -2.0]])
assert ar.classify(ar.Diffusion.exp_decay(1.0, 1.0, eye), drift)['regime'] == 'StableAS'
v = ar.classify(ar.Diffusion.log_power(1.0, eye), drift)
assert v['regime'] == 'BoundedNonConvergent'
lo, hi = v['epsilon_star_bracket']
assert lo <= 2.0 <= hi
assert ar.classify(ar.Diffusion.constant(eye), drift)['regime'] == 'Unbounded'
",
    );
}

#[test]
fn errors_become_exceptions() {
    with_module(
        c"
try:
    ar.Diffusion.constant([[1.0], [1.0, 2.0]])
    raise AssertionError('ragged rows accepted')
except ValueError:
    pass
try:
    ar.classify(ar.Diffusion.constant([[1.0]]), ar.Drift.constant([[-1.0, 0.0], [0.0, -1.0]]))
    raise AssertionError('shape mismatch accepted')
except ValueError:
    pass
try:
    ar.build_min_sequence(lambda t: 1 / 0, 1.0, 3)
    raise AssertionError('callback error swallowed')
except ZeroDivisionError:
    pass
",
    );
}

#[test]
fn simulation_and_evidence() {
    with_module(
        c"
drift = ar.Drift.constant([[-1.0]])
sigma = ar.Diffusion.exp_decay(1.0, 1.0, [[1.0]])
ens = ar.simulate(drift, sigma, 0.05, 256.0, 20, seed=1, stride=20)
assert len(ens) == 20 and ens.d == 1
assert ens.times[-1] == 256.0
ev = ar.verify(drift, sigma, ens)
assert ev['agreement'] == 'Consistent', ev['checks']
x = ar.simulate(drift, ar.Diffusion.constant([[0.0]]), 0.5, 5.0, 1, xi=[2.0])
import math
assert all(abs(s[0] - 2.0 * math.exp(-t)) < 1e-13 for s, t in zip(x.states(0), x.times))
",
    );
}
