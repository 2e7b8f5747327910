#![no_main]

use gafhole::CoefficientModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = serde_json::from_slice::<CoefficientModel>(data) else { return };
    let json = serde_json::to_string(&model).unwrap();
    assert_eq!(serde_json::from_str::<CoefficientModel>(&json).unwrap(), model);
    let _ = model.coefficients_to(64);
    let _ = model.sigma_sq(0.5);
});
