use pyo3::prelude::*;

fn with_module(code: &std::ffi::CStr) {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(tedm);
        Python::initialize();
    });
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.display(py);
            panic!("python assertion failed");
        }
    });
}

use ::tedm::tedm;

#[test]
fn metrics_round_trip_through_python() {
    with_module(
        cr#"
import tedm
from fractions import Fraction
assert tedm.nakamoto([40, 30, 20, 10]) == 2
assert tedm.gini_exact(["1/2", "1/2", 0]) == Fraction(1, 3)
try:
    tedm.gini([-1, 2])
except tedm.TedmError:
    pass
else:
    raise AssertionError("negative weight accepted")
"#,
    );
}

#[test]
fn documents_and_recommendations() {
    with_module(
        cr#"
import tedm
doc = tedm.EconomySpec.fixture("curve")
assert doc.is_valid()
assert tedm.EconomySpec.parse(doc.to_toml()).to_dict() == doc.to_dict()
assert tedm.recommend_mechanism({"accountability": 2})["ranked"][0]["family"] == "conviction"
assert len(tedm.property_matrix()["cells"]) == 30
"#,
    );
}
