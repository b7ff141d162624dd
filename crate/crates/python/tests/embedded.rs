use pyo3::prelude::*;
use pyo3::types::PyDict;

use ratio_mc_py::ratio_mc_py;

// One test: the interpreter and its init table are process-wide.
#[test]
fn module_round_trip_in_embedded_interpreter() {
    pyo3::append_to_inittab!(ratio_mc_py);
    Python::initialize();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        py.run(
            cr#"
import math
import ratio_mc_py as rm

p1 = rm.Distribution.normal_1d(0.0, 1.0)
p0 = rm.Distribution.normal_1d(0.0, 4.0)
ds = rm.Dataset.build(p1, p0, 500, 500, seed=3)
est = rm.RatioEstimator.oracle(p1, p0, 500, 500)
ratio = est.ratio_hat([1.0])
exact = math.exp(p1.log_pdf([1.0]) - p0.log_pdf([1.0]))
c = est.estimate_c(ds)
pts, meta = est.ar_sample(p0, 200, seed=1, c=2.0)
ones = est.is_estimate(p0, "1", 1000, seed=2)["estimate"]
try:
    rm.RatioEstimator.constant(1.5, 1, 1)
    bad = False
except ValueError:
    bad = True
"#,
            None,
            Some(&locals),
        )
        .unwrap();
        let get = |k: &str| locals.get_item(k).unwrap().unwrap();
        let ratio: f64 = get("ratio").extract().unwrap();
        let exact: f64 = get("exact").extract().unwrap();
        assert!((ratio / exact - 1.0).abs() < 1e-12);
        let c: f64 = get("c").extract().unwrap();
        assert!(c > 1.5 && c <= 2.0, "{c}");
        let pts: Vec<Vec<f64>> = get("pts").extract().unwrap();
        assert_eq!(pts.len(), 200);
        assert_eq!(get("ones").extract::<f64>().unwrap(), 1.0);
        assert!(get("bad").extract::<bool>().unwrap());
    });
}
