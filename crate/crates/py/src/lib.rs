use pyo3::prelude::*;

#[pymodule]
fn hardyscope(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
