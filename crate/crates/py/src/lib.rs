//! Python bindings. Reports cross the boundary as plain dicts.

#[pyo3::pymodule]
mod rakg {
    use std::path::PathBuf;

    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use serde::Serialize;

    use rakg_core::config::{ExperimentConfig, Scheme};
    use rakg_core::experiment::{self, ExperimentOutput};
    use rakg_core::quantize::QuantizerConfig;
    use rakg_core::reconcile::{self, RsParams};
    use rakg_core::{analysis, quantize, randomness, special, trace, Error};

    fn py_err(e: Error) -> PyErr {
        if e.is_validation() {
            PyValueError::new_err(e.to_string())
        } else {
            PyRuntimeError::new_err(e.to_string())
        }
    }

    fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
        let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        py.import("json")?.call_method1("loads", (text,))
    }

    #[pyclass(name = "Config")]
    struct Config {
        inner: ExperimentConfig,
    }

    #[pymethods]
    impl Config {
        #[staticmethod]
        fn from_toml(text: &str) -> PyResult<Self> {
            let inner = ExperimentConfig::from_toml_str(text, None).map_err(py_err)?;
            Ok(Self { inner })
        }

        #[staticmethod]
        fn load(path: PathBuf) -> PyResult<Self> {
            let inner = rakg_core::config::parse_config(&path).map_err(py_err)?;
            Ok(Self { inner })
        }

        fn to_toml(&self) -> PyResult<String> {
            self.inner.to_toml_string().map_err(py_err)
        }

        #[getter]
        fn seed(&self) -> u64 {
            self.inner.seed
        }

        #[setter]
        fn set_seed(&mut self, seed: u64) {
            self.inner.seed = seed;
        }

        #[getter]
        fn scheme(&self) -> &'static str {
            match self.inner.scheme {
                Scheme::Rakg => "rakg",
                Scheme::Oakg => "oakg",
            }
        }

        #[setter]
        fn set_scheme(&mut self, scheme: &str) -> PyResult<()> {
            self.inner.scheme = match scheme.to_ascii_lowercase().as_str() {
                "rakg" => Scheme::Rakg,
                "oakg" => Scheme::Oakg,
                other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
            };
            Ok(())
        }

        #[getter]
        fn rounds(&self) -> usize {
            self.inner.session.rounds
        }

        #[setter]
        fn set_rounds(&mut self, rounds: usize) -> PyResult<()> {
            self.inner.session.rounds = rounds;
            self.inner.validate().map_err(py_err)
        }

        #[getter]
        fn adversary(&self) -> bool {
            self.inner.adversary.enabled
        }

        #[setter]
        fn set_adversary(&mut self, enabled: bool) {
            self.inner.adversary.enabled = enabled;
        }
    }

    #[pyclass(name = "Session")]
    struct Session {
        inner: ExperimentOutput,
    }

    #[pymethods]
    impl Session {
        /// The full JSON report as a dict.
        fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
            to_py(py, &self.inner.report)
        }

        #[getter]
        fn s_a(&self) -> Vec<u8> {
            self.inner.quantization.s_a.bits.clone()
        }

        #[getter]
        fn s_b(&self) -> Vec<u8> {
            self.inner.quantization.s_b.bits.clone()
        }

        #[getter]
        fn key_bits(&self) -> usize {
            self.inner.report.key_bits
        }

        #[getter]
        fn kre(&self) -> Option<f64> {
            self.inner.report.attack.and_then(|a| a.kre)
        }

        #[getter]
        fn krr(&self) -> Option<f64> {
            self.inner.report.attack.and_then(|a| a.krr)
        }

        #[getter]
        fn bit_mismatch_rate(&self) -> f64 {
            self.inner.report.bit_mismatch_rate
        }

        fn write_artifacts(&self, dir: PathBuf) -> PyResult<()> {
            experiment::write_artifacts(&self.inner, &dir).map_err(py_err).map(|_| ())
        }
    }

    #[pyfunction]
    fn run_experiment(config: &Config) -> PyResult<Session> {
        let inner = experiment::run_experiment(&config.inner).map_err(py_err)?;
        Ok(Session { inner })
    }

    #[pyfunction]
    fn analyze<'py>(py: Python<'py>, config: &Config) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &experiment::analyze(&config.inner).map_err(py_err)?)
    }

    #[pyfunction]
    #[pyo3(signature = (path, config=None, attack=false, seed=0))]
    fn replay(path: PathBuf, config: Option<&Config>, attack: bool, seed: u64) -> PyResult<Session> {
        let t = trace::ingest_trace(&path).map_err(py_err)?;
        let quantizer = config.map_or_else(QuantizerConfig::default, |c| c.inner.quantizer);
        let rs = config.map_or_else(RsParams::default, |c| c.inner.reconciliation);
        let adv = config.map_or_else(Default::default, |c| c.inner.adversary_config());
        let inner = experiment::replay(t, &quantizer, attack.then_some(&adv), rs, seed).map_err(py_err)?;
        Ok(Session { inner })
    }

    #[pyfunction]
    fn marcum_q1(a: f64, b: f64) -> f64 {
        special::marcum_q1(a, b)
    }

    #[pyfunction]
    fn thresholds(x: Vec<f64>, beta: f64) -> PyResult<(f64, f64)> {
        let t = quantize::thresholds(&x, beta).map_err(py_err)?;
        Ok((t.lower, t.upper))
    }

    #[pyfunction]
    fn guess_count_pmf(n: u64, n0: u64, p0: f64, p1: f64) -> PyResult<Vec<f64>> {
        analysis::guess_count_pmf(n, n0, p0, p1).map_err(py_err)
    }

    /// `(E[KRE], E[KRR])`; the first is `None` when `n = 0`.
    #[pyfunction]
    fn expected_rates(n: u64, n0: u64, p0: f64, p1: f64, ell: u64) -> PyResult<(Option<f64>, f64)> {
        let r = analysis::expected_rates(n, n0, p0, p1, ell).map_err(py_err)?;
        Ok((r.kre, r.krr))
    }

    #[pyfunction]
    fn key_guess_probability<'py>(
        py: Python<'py>,
        ell: u64,
        n: u64,
        n0: u64,
        p0: f64,
        p1: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &analysis::key_guess_probability(ell, n, n0, p0, p1).map_err(py_err)?)
    }

    #[pyfunction]
    fn randomness_tests<'py>(py: Python<'py>, bits: Vec<u8>) -> PyResult<Bound<'py, PyAny>> {
        if bits.iter().any(|&b| b > 1) {
            return Err(PyValueError::new_err("bits must be 0 or 1"));
        }
        to_py(py, &randomness::randomness_tests(&bits))
    }

    #[pyclass(name = "ReedSolomon")]
    struct ReedSolomon {
        inner: reconcile::ReedSolomon,
    }

    #[pymethods]
    impl ReedSolomon {
        #[new]
        fn new(m: u32, n: usize, k: usize) -> PyResult<Self> {
            let inner = reconcile::ReedSolomon::new(RsParams { m, n, k }).map_err(py_err)?;
            Ok(Self { inner })
        }

        fn encode(&self, word: Vec<u16>) -> PyResult<Vec<u16>> {
            self.inner.encode(&word).map_err(py_err)
        }

        /// The decoded word, or `None` when the word is uncorrectable.
        fn decode(&self, received: Vec<u16>) -> PyResult<Option<Vec<u16>>> {
            Ok(self.inner.decode(&received).map_err(py_err)?.ok())
        }
    }
}
