//! Python bindings. Structured results are returned as JSON strings in the
//! same shape the command-line tool prints.

#[pyo3::pymodule]
mod ltl_compose_py {
    use pyo3::exceptions::PyValueError;
    use pyo3::prelude::*;
    use serde_json::json;

    use ltl_compose::gridworld::{fmt_label_set, parse_map, Cell, GridMap, LabelSet, Symbol};
    use ltl_compose::ltl::{accepts_lasso, eval_ltl_on_lasso, parse_ltl, to_buchi, BuchiAutomaton};
    use ltl_compose::pipeline::{self, Abstraction, Options, Timings};

    fn err(e: impl std::fmt::Display) -> PyErr {
        PyValueError::new_err(e.to_string())
    }

    fn word(letters: Vec<Vec<String>>) -> PyResult<Vec<LabelSet>> {
        letters
            .into_iter()
            .map(|l| l.iter().map(|s| Symbol::new(s).map_err(err)).collect())
            .collect()
    }

    fn abstraction(map: &Map, start: Option<(usize, usize)>) -> PyResult<Abstraction> {
        let opts = Options {
            start: start.map(|(x, y)| Cell::new(x, y)),
            ..Options::default()
        };
        pipeline::abstract_map(&map.inner, &opts, &mut Timings::default()).map_err(err)
    }

    /// A grid map, parsed from ASCII or a JSON document.
    #[pyclass(frozen)]
    struct Map {
        inner: GridMap,
    }

    #[pymethods]
    impl Map {
        #[new]
        fn new(text: &str) -> PyResult<Self> {
            Ok(Map {
                inner: parse_map(text).map_err(err)?,
            })
        }

        #[staticmethod]
        fn load(path: &str) -> PyResult<Self> {
            let text = std::fs::read_to_string(path).map_err(err)?;
            Map::new(&text)
        }

        #[getter]
        fn width(&self) -> usize {
            self.inner.width()
        }

        #[getter]
        fn height(&self) -> usize {
            self.inner.height()
        }

        fn alphabet(&self) -> Vec<String> {
            self.inner.alphabet().iter().map(|s| s.name().to_string()).collect()
        }

        fn to_json(&self) -> String {
            serde_json::to_string(&self.inner.to_document()).expect("map serializes")
        }

        fn __repr__(&self) -> String {
            format!("Map({}x{})", self.inner.width(), self.inner.height())
        }
    }

    /// Büchi automaton compiled from a formula.
    #[pyclass(frozen)]
    struct Automaton {
        inner: BuchiAutomaton,
    }

    #[pymethods]
    impl Automaton {
        #[getter]
        fn num_states(&self) -> usize {
            self.inner.num_states()
        }

        /// Does the automaton accept prefix followed by cycle repeated forever?
        fn accepts(&self, prefix: Vec<Vec<String>>, cycle: Vec<Vec<String>>) -> PyResult<bool> {
            accepts_lasso(&self.inner, &word(prefix)?, &word(cycle)?).map_err(err)
        }

        fn to_json(&self) -> String {
            serde_json::to_string(&self.inner.to_document()).expect("automaton serializes")
        }

        fn to_dot(&self) -> String {
            self.inner.to_dot("buchi")
        }
    }

    /// Compiles a formula; with a map, atoms must be declared by it.
    #[pyfunction]
    #[pyo3(signature = (formula, map=None))]
    fn compile(formula: &str, map: Option<PyRef<'_, Map>>) -> PyResult<Automaton> {
        let inner = match map {
            Some(m) => pipeline::compile(formula, m.inner.alphabet(), &mut Timings::default())
                .map_err(err)?
                .1,
            None => to_buchi(&parse_ltl(formula).map_err(err)?),
        };
        Ok(Automaton { inner })
    }

    /// Direct semantic evaluation on a lasso word.
    #[pyfunction]
    fn evaluate(formula: &str, prefix: Vec<Vec<String>>, cycle: Vec<Vec<String>>) -> PyResult<bool> {
        let f = parse_ltl(formula).map_err(err)?;
        eval_ltl_on_lasso(&f, &word(prefix)?, &word(cycle)?).map_err(err)
    }

    /// Transition system document, pruned unless asked otherwise.
    #[pyfunction]
    #[pyo3(signature = (map, start=None, pruned=true))]
    fn transition_system(map: PyRef<'_, Map>, start: Option<(usize, usize)>, pruned: bool) -> PyResult<String> {
        let abs = abstraction(&map, start)?;
        let ts = if pruned { &abs.pruned } else { &abs.unpruned };
        Ok(serde_json::to_string(&ts.to_document()).expect("ts serializes"))
    }

    /// Shortest plan document for the formula on the map.
    #[pyfunction]
    #[pyo3(signature = (map, formula, start=None))]
    fn plan(map: PyRef<'_, Map>, formula: &str, start: Option<(usize, usize)>) -> PyResult<String> {
        let abs = abstraction(&map, start)?;
        let mut t = Timings::default();
        let (_, aut) = pipeline::compile(formula, abs.map.alphabet(), &mut t).map_err(err)?;
        let (_, plan) = pipeline::plan(&abs, &aut, &mut t).map_err(err)?;
        Ok(serde_json::to_string(&plan.to_document()).expect("plan serializes"))
    }

    /// Plans, executes with minimum-violation policies and checks the trace.
    #[pyfunction]
    #[pyo3(signature = (map, formula, cycles=1, start=None))]
    fn run(map: PyRef<'_, Map>, formula: &str, cycles: usize, start: Option<(usize, usize)>) -> PyResult<String> {
        let abs = abstraction(&map, start)?;
        let mut t = Timings::default();
        let (_, aut) = pipeline::compile(formula, abs.map.alphabet(), &mut t).map_err(err)?;
        let (_, plan) = pipeline::plan(&abs, &aut, &mut t).map_err(err)?;
        let exec = pipeline::execute(&abs, &aut, &plan, cycles, &mut t).map_err(err)?;
        let doc = json!({
            "formula": formula,
            "plan": plan.to_document(),
            "satisfied": exec.satisfied,
            "unsafe": exec.unsafe_report,
            "word": exec.trace.word.iter().map(fmt_label_set).collect::<Vec<_>>(),
            "trace": exec.trace.to_document(),
        });
        Ok(doc.to_string())
    }
}
