//! Python bindings: parameters, in-memory trees, durable stores and the
//! three proof verifiers. Keys, values and blobs cross as `bytes`.

use std::path::PathBuf;
use std::sync::Arc;

use kzg_bptree::algebra;
use kzg_bptree::authtree::{AuthTree, Op, RootRecord, Snapshot};
use kzg_bptree::btree::Key;
use kzg_bptree::polycommit::PublicParams;
use kzg_bptree::proofs::{self, Proof};
use kzg_bptree::store::Store as DiskStore;
use kzg_bptree::Error;
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::CorruptStore(_) => PyIOError::new_err(e.to_string()),
        Error::KeyAbsent | Error::KeyPresent | Error::RootNotFound(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn key(bytes: &[u8]) -> PyResult<Key> {
    Key::new(bytes).map_err(to_py)
}

fn record(bytes: &[u8]) -> PyResult<RootRecord> {
    RootRecord::from_bytes(bytes).map_err(to_py)
}

fn blob<'py>(py: Python<'py>, proof: impl Into<Proof>) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &proof.into().to_bytes())
}

/// Public parameters for committing nodes of up to `degree_bound` entries.
#[pyclass(frozen)]
pub struct Params {
    inner: Arc<PublicParams>,
}

#[pymethods]
impl Params {
    /// Deterministic parameters whose trapdoor derives from `seed`.
    #[staticmethod]
    fn test_mode(t: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(PublicParams::test_mode(t, seed).map_err(to_py)?) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(PublicParams::read_file(&path).map_err(to_py)?) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_file(&path).map_err(to_py)
    }

    #[getter]
    fn degree_bound(&self) -> usize {
        self.inner.degree_bound()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }
}

fn prove_in<'py>(py: Python<'py>, snap: &Snapshot, k: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    Ok(blob(py, snap.prove_membership(&key(k)?).map_err(to_py)?))
}

fn prove_absent_in<'py>(py: Python<'py>, snap: &Snapshot, k: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    Ok(blob(py, snap.prove_nonmembership(&key(k)?).map_err(to_py)?))
}

fn prove_range_in<'py>(py: Python<'py>, snap: &Snapshot, lo: &[u8], hi: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    Ok(blob(py, snap.prove_range(&key(lo)?, &key(hi)?).map_err(to_py)?))
}

/// In-memory authenticated tree. Values are kept only as digests.
#[pyclass]
pub struct Tree {
    inner: AuthTree,
}

#[pymethods]
impl Tree {
    #[new]
    fn new(params: &Params, q: usize) -> PyResult<Self> {
        Ok(Self { inner: AuthTree::new(params.inner.clone(), q).map_err(to_py)? })
    }

    /// Inserts or overwrites `key` and returns the new root record.
    fn insert<'py>(&mut self, py: Python<'py>, key_bytes: &[u8], value: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        self.apply(py, vec![(key_bytes.to_vec(), Some(value.to_vec()))])
    }

    fn delete<'py>(&mut self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        self.apply(py, vec![(key_bytes.to_vec(), None)])
    }

    /// Applies `(key, value)` pairs in order as one batch; a `None` value
    /// deletes the key.
    fn apply<'py>(&mut self, py: Python<'py>, ops: Vec<(Vec<u8>, Option<Vec<u8>>)>) -> PyResult<Bound<'py, PyBytes>> {
        let ops = ops
            .into_iter()
            .map(|(k, v)| {
                let k = key(&k)?;
                Ok(match v {
                    Some(v) => Op::insert(k, &v),
                    None => Op::delete(k),
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let r = self.inner.apply_updates(&ops).map_err(to_py)?;
        Ok(PyBytes::new(py, &r.to_bytes()))
    }

    /// Digest of the value under `key`, or `None`.
    fn get<'py>(&self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Option<Bound<'py, PyBytes>>> {
        Ok(self.inner.get(&key(key_bytes)?).map(|v| PyBytes::new(py, &v.digest)))
    }

    fn range<'py>(&self, py: Python<'py>, lo: &[u8], hi: &[u8]) -> PyResult<Vec<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)>> {
        let entries = self.inner.snapshot().range_scan(&key(lo)?, &key(hi)?).map_err(to_py)?;
        Ok(entries.iter().map(|(k, v)| (PyBytes::new(py, k.as_bytes()), PyBytes::new(py, &v.digest))).collect())
    }

    fn root<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.record().to_bytes())
    }

    fn history<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.inner.history().iter().map(|r| PyBytes::new(py, &r.to_bytes())).collect()
    }

    fn prove<'py>(&self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_in(py, &self.inner.snapshot(), key_bytes)
    }

    fn prove_absent<'py>(&self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_absent_in(py, &self.inner.snapshot(), key_bytes)
    }

    fn prove_range<'py>(&self, py: Python<'py>, lo: &[u8], hi: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_range_in(py, &self.inner.snapshot(), lo, hi)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Directory-backed store holding values, node pages and root history.
#[pyclass]
pub struct Store {
    inner: DiskStore,
}

#[pymethods]
impl Store {
    #[staticmethod]
    fn create(path: PathBuf, params: &Params, q: usize) -> PyResult<Self> {
        Ok(Self { inner: DiskStore::create(&path, params.inner.clone(), q).map_err(to_py)? })
    }

    #[staticmethod]
    fn open(path: PathBuf, params: &Params) -> PyResult<Self> {
        Ok(Self { inner: DiskStore::open(&path, params.inner.clone()).map_err(to_py)? })
    }

    fn insert<'py>(&mut self, py: Python<'py>, key_bytes: &[u8], value: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        let r = self.inner.insert(key(key_bytes)?, value).map_err(to_py)?;
        Ok(PyBytes::new(py, &r.to_bytes()))
    }

    fn delete<'py>(&mut self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        let r = self.inner.delete(key(key_bytes)?).map_err(to_py)?;
        Ok(PyBytes::new(py, &r.to_bytes()))
    }

    fn get<'py>(&mut self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Option<Bound<'py, PyBytes>>> {
        Ok(self.inner.get(&key(key_bytes)?).map_err(to_py)?.map(|v| PyBytes::new(py, &v)))
    }

    fn root<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.record().to_bytes())
    }

    fn history<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.inner.history().iter().map(|r| PyBytes::new(py, &r.to_bytes())).collect()
    }

    fn prove<'py>(&self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_in(py, &self.inner.snapshot(), key_bytes)
    }

    fn prove_absent<'py>(&self, py: Python<'py>, key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_absent_in(py, &self.inner.snapshot(), key_bytes)
    }

    fn prove_range<'py>(&self, py: Python<'py>, lo: &[u8], hi: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        prove_range_in(py, &self.inner.snapshot(), lo, hi)
    }

    /// Membership proof against an earlier root, given its 32-byte hash.
    fn prove_at<'py>(&mut self, py: Python<'py>, root_hash: [u8; 32], key_bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        let snap = self.inner.load_snapshot(&root_hash).map_err(to_py)?;
        prove_in(py, &snap, key_bytes)
    }
}

fn decode(proof: &[u8]) -> Option<Proof> {
    Proof::from_bytes(proof).ok()
}

#[pyfunction]
fn verify_membership(params: &Params, root: &[u8], key_bytes: &[u8], value: &[u8], proof: &[u8]) -> PyResult<bool> {
    let root = record(root)?;
    Ok(match decode(proof) {
        Some(Proof::Membership(p)) => {
            proofs::verify_membership(&params.inner, &root, &key(key_bytes)?, &algebra::hash(value), &p)
        }
        _ => false,
    })
}

#[pyfunction]
fn verify_nonmembership(params: &Params, root: &[u8], key_bytes: &[u8], proof: &[u8]) -> PyResult<bool> {
    let root = record(root)?;
    Ok(match decode(proof) {
        Some(Proof::NonMembership(p)) => proofs::verify_nonmembership(&params.inner, &root, &key(key_bytes)?, &p),
        _ => false,
    })
}

#[pyfunction]
fn verify_range(params: &Params, root: &[u8], lo: &[u8], hi: &[u8], proof: &[u8]) -> PyResult<bool> {
    let root = record(root)?;
    Ok(match decode(proof) {
        Some(Proof::Range(p)) => proofs::verify_range(&params.inner, &root, &key(lo)?, &key(hi)?, &p),
        _ => false,
    })
}

/// Keys and value digests proven by a range proof, in key order.
#[pyfunction]
fn range_entries<'py>(py: Python<'py>, proof: &[u8]) -> PyResult<Vec<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)>> {
    match decode(proof) {
        Some(Proof::Range(p)) => {
            Ok(p.interior.iter().map(|(k, d)| (PyBytes::new(py, k.as_bytes()), PyBytes::new(py, d))).collect())
        }
        _ => Err(PyValueError::new_err("not a range proof")),
    }
}

/// Root hash and element count of an encoded root record.
#[pyfunction]
fn parse_root<'py>(py: Python<'py>, root: &[u8]) -> PyResult<(Bound<'py, PyBytes>, u64)> {
    let r = record(root)?;
    Ok((PyBytes::new(py, &r.root_hash), r.element_count))
}

#[pyfunction]
fn hash<'py>(py: Python<'py>, data: &[u8]) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &algebra::hash(data))
}

#[pymodule]
fn kbpt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<Tree>()?;
    m.add_class::<Store>()?;
    m.add_function(wrap_pyfunction!(verify_membership, m)?)?;
    m.add_function(wrap_pyfunction!(verify_nonmembership, m)?)?;
    m.add_function(wrap_pyfunction!(verify_range, m)?)?;
    m.add_function(wrap_pyfunction!(range_entries, m)?)?;
    m.add_function(wrap_pyfunction!(parse_root, m)?)?;
    m.add_function(wrap_pyfunction!(hash, m)?)?;
    Ok(())
}
