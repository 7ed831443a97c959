//! On-disk persistence: a page file of committed nodes, a value log, and a
//! roots file holding the published [`RootRecord`] chain.
//!
//! All three files are append-only. Pages are addressed by their byte
//! offset and a node is written once, after its children. A batch becomes
//! visible only when its root entry is appended, which happens after the
//! value log and pages are synced, so a crash leaves the previous root
//! intact. A torn trailing root entry is ignored on open.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::algebra::{hash, Digest, G1_BYTES};
use crate::authtree::{node_hash, recommit_node, AuthNode, AuthTree, NodeAuth, Op, RootRecord, Snapshot};
use crate::btree::{Body, Key, LeafValue, Node, NodeId, NodeType, ValueLocation};
use crate::error::{Error, Result};
use crate::polycommit::{Commitment, PublicParams};

const PAGES_FILE: &str = "pages.dat";
const VALUES_FILE: &str = "values.dat";
const ROOTS_FILE: &str = "roots.dat";

const PAGES_MAGIC: &[u8; 8] = b"KBPTPAGE";
const VALUES_MAGIC: &[u8; 8] = b"KBPTVALS";
const ROOTS_MAGIC: &[u8; 8] = b"KBPTROOT";
const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: u64 = 12;
const ROOTS_HEADER_LEN: u64 = HEADER_LEN + 4 + 32;
const NO_PAGE: u64 = u64::MAX;
const ROOT_ENTRY_LEN: usize = RootRecord::ENCODED_LEN + 8 + 8;

/// Where a value was appended in the log, with the digest of its bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValueLogEntry {
    pub offset: u64,
    pub length: u32,
    pub digest: Digest,
}

impl ValueLogEntry {
    pub fn leaf_value(&self) -> LeafValue {
        LeafValue {
            digest: self.digest,
            location: Some(ValueLocation { offset: self.offset, length: self.length }),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct StoredRoot {
    record: RootRecord,
    page: u64,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptStore(msg.into())
}

fn header(magic: &[u8; 8]) -> Vec<u8> {
    let mut h = magic.to_vec();
    h.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    h
}

fn check_header(file: &mut File, magic: &[u8; 8], name: &str) -> Result<()> {
    let mut buf = [0u8; HEADER_LEN as usize];
    file.seek(SeekFrom::Start(0))?;
    file.read_exact(&mut buf).map_err(|_| corrupt(format!("{name}: missing header")))?;
    if &buf[..8] != magic {
        return Err(corrupt(format!("{name}: bad magic")));
    }
    let version = u32::from_le_bytes(buf[8..].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("{name}: unsupported version {version}")));
    }
    Ok(())
}

fn params_digest(params: &PublicParams) -> Digest {
    hash(&params.to_bytes())
}

/// A directory-backed authenticated key-value store. Single writer.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    pages: File,
    values: File,
    roots_file: File,
    tree: AuthTree,
    roots: Vec<StoredRoot>,
    page_of: HashMap<NodeId, u64>,
}

impl Store {
    /// Creates a new store in `dir`, which may exist but must not already
    /// hold store files.
    pub fn create(dir: &Path, params: Arc<PublicParams>, q: usize) -> Result<Self> {
        let tree = AuthTree::new(params.clone(), q)?;
        fs::create_dir_all(dir)?;
        let create = |name: &str, head: &[u8]| -> Result<File> {
            let mut f = OpenOptions::new().read(true).append(true).create_new(true).open(dir.join(name))?;
            f.write_all(head)?;
            f.sync_all()?;
            Ok(f)
        };
        let pages = create(PAGES_FILE, &header(PAGES_MAGIC))?;
        let values = create(VALUES_FILE, &header(VALUES_MAGIC))?;
        let mut roots_head = header(ROOTS_MAGIC);
        roots_head.extend_from_slice(&(q as u32).to_le_bytes());
        roots_head.extend_from_slice(&params_digest(&params));
        let mut roots_file = create(ROOTS_FILE, &roots_head)?;
        let genesis = StoredRoot { record: RootRecord::genesis(), page: NO_PAGE };
        append_root(&mut roots_file, &genesis)?;
        Ok(Self { dir: dir.to_path_buf(), pages, values, roots_file, tree, roots: vec![genesis], page_of: HashMap::new() })
    }

    /// Opens an existing store and loads its latest root.
    pub fn open(dir: &Path, params: Arc<PublicParams>) -> Result<Self> {
        let open = |name: &str| -> Result<File> {
            Ok(OpenOptions::new().read(true).append(true).open(dir.join(name))?)
        };
        let mut pages = open(PAGES_FILE)?;
        let mut values = open(VALUES_FILE)?;
        let mut roots_file = open(ROOTS_FILE)?;
        check_header(&mut pages, PAGES_MAGIC, PAGES_FILE)?;
        check_header(&mut values, VALUES_MAGIC, VALUES_FILE)?;
        check_header(&mut roots_file, ROOTS_MAGIC, ROOTS_FILE)?;

        let mut rest = Vec::new();
        roots_file.read_to_end(&mut rest)?;
        if rest.len() < 36 {
            return Err(corrupt("roots: truncated header"));
        }
        let q = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        if rest[4..36] != params_digest(&params) {
            return Err(corrupt("store was created with different public parameters"));
        }
        let mut roots = Vec::new();
        for chunk in rest[36..].chunks(ROOT_ENTRY_LEN) {
            match decode_root(chunk) {
                Some(r) => roots.push(r?),
                // torn write of the last entry
                None => break,
            }
        }
        let last = *roots.last().ok_or_else(|| corrupt("roots: no genesis record"))?;
        // drop any torn tail so later appends stay aligned
        let valid_len = ROOTS_HEADER_LEN + (roots.len() * ROOT_ENTRY_LEN) as u64;
        if roots_file.metadata()?.len() != valid_len {
            roots_file.set_len(valid_len)?;
        }

        let mut page_of = HashMap::new();
        let root = load_tree(&mut pages, &params, last.page, &mut page_of)?;
        if root.annotation().map_or(RootRecord::genesis().root_hash, |a| a.node_hash) != last.record.root_hash {
            return Err(corrupt("root page does not match its record"));
        }
        let history = roots.iter().map(|r| r.record).collect();
        let tree = AuthTree::from_parts(params, q, Arc::new(root), history)?;
        Ok(Self { dir: dir.to_path_buf(), pages, values, roots_file, tree, roots, page_of })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn tree(&self) -> &AuthTree {
        &self.tree
    }

    pub fn record(&self) -> &RootRecord {
        self.tree.record()
    }

    pub fn history(&self) -> &[RootRecord] {
        self.tree.history()
    }

    pub fn snapshot(&self) -> Snapshot {
        self.tree.snapshot()
    }

    /// Appends `bytes` to the value log. The entry becomes durable with the
    /// next published batch.
    pub fn put_value(&mut self, bytes: &[u8]) -> Result<ValueLogEntry> {
        let length = u32::try_from(bytes.len()).map_err(|_| Error::Decode("value larger than 4 GiB".into()))?;
        let offset = self.values.seek(SeekFrom::End(0))?;
        self.values.write_all(bytes)?;
        Ok(ValueLogEntry { offset, length, digest: hash(bytes) })
    }

    /// Reads a value back and checks it against its digest.
    pub fn get_value(&mut self, entry: &ValueLogEntry) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; entry.length as usize];
        self.values.seek(SeekFrom::Start(entry.offset))?;
        self.values.read_exact(&mut buf)?;
        if hash(&buf) != entry.digest {
            return Err(corrupt(format!("value at offset {} fails its digest", entry.offset)));
        }
        Ok(buf)
    }

    /// Value bytes stored under `key` in the current version.
    pub fn get(&mut self, key: &Key) -> Result<Option<Vec<u8>>> {
        let Some(value) = self.tree.get(key) else { return Ok(None) };
        let loc = value.location.ok_or_else(|| corrupt("leaf value has no log position"))?;
        let entry = ValueLogEntry { offset: loc.offset, length: loc.length, digest: value.digest };
        self.get_value(&entry).map(Some)
    }

    pub fn insert(&mut self, key: Key, value: &[u8]) -> Result<RootRecord> {
        let entry = self.put_value(value)?;
        self.apply(&[Op::Insert { key, value: entry.leaf_value() }])
    }

    pub fn delete(&mut self, key: Key) -> Result<RootRecord> {
        self.apply(&[Op::delete(key)])
    }

    /// Applies a batch and makes it durable. Insert values should come from
    /// [`put_value`](Self::put_value) so they can be read back.
    pub fn apply(&mut self, ops: &[Op]) -> Result<RootRecord> {
        let before = self.tree.history().len();
        let record = self.tree.apply_updates(ops)?;
        if self.tree.history().len() == before {
            return Ok(record);
        }
        self.values.sync_data()?;
        let snap = self.tree.snapshot();
        let page = if snap.is_empty() { NO_PAGE } else { self.write_node(snap.root(), true)? };
        self.pages.sync_data()?;
        let stored = StoredRoot { record, page };
        append_root(&mut self.roots_file, &stored)?;
        self.roots.push(stored);
        Ok(record)
    }

    fn write_node(&mut self, node: &AuthNode, is_root: bool) -> Result<u64> {
        if let Some(page) = self.page_of.get(&node.id()) {
            return Ok(*page);
        }
        let children = match node.body() {
            Body::Internal(children) => {
                children.iter().map(|c| self.write_node(c, false)).collect::<Result<Vec<_>>>()?
            }
            Body::Leaf(_) => Vec::new(),
        };
        let body = encode_page(node, node.node_type(is_root), &children);
        let offset = self.pages.seek(SeekFrom::End(0))?;
        self.pages.write_all(&(body.len() as u32).to_le_bytes())?;
        self.pages.write_all(&body)?;
        self.page_of.insert(node.id(), offset);
        Ok(offset)
    }

    /// Read-only view of any published version, loaded from disk.
    pub fn load_snapshot(&mut self, root_hash: &Digest) -> Result<Snapshot> {
        let stored = *self
            .roots
            .iter()
            .rev()
            .find(|r| r.record.root_hash == *root_hash)
            .ok_or_else(|| Error::RootNotFound(to_hex(root_hash)))?;
        let params = self.tree.params().clone();
        let mut seen = HashMap::new();
        let root = load_tree(&mut self.pages, &params, stored.page, &mut seen)?;
        Ok(Snapshot::new(params, self.tree.q(), Arc::new(root), stored.record))
    }
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn append_root(file: &mut File, root: &StoredRoot) -> Result<()> {
    let mut entry = Vec::with_capacity(ROOT_ENTRY_LEN);
    entry.extend_from_slice(&root.record.to_bytes());
    entry.extend_from_slice(&root.page.to_le_bytes());
    let check = hash(&entry);
    entry.extend_from_slice(&check[..8]);
    file.write_all(&entry)?;
    file.sync_data()?;
    Ok(())
}

/// `None` for an incomplete or torn entry.
fn decode_root(chunk: &[u8]) -> Option<Result<StoredRoot>> {
    if chunk.len() != ROOT_ENTRY_LEN {
        return None;
    }
    let body = &chunk[..ROOT_ENTRY_LEN - 8];
    if hash(body)[..8] != chunk[ROOT_ENTRY_LEN - 8..] {
        return None;
    }
    let record = match RootRecord::from_bytes(&body[..RootRecord::ENCODED_LEN]) {
        Ok(r) => r,
        Err(e) => return Some(Err(e)),
    };
    let page = u64::from_le_bytes(body[RootRecord::ENCODED_LEN..].try_into().unwrap());
    Some(Ok(StoredRoot { record, page }))
}

// page body:
//   role:u8 kind:u8 count:u16 entry* commitment:48 node_hash:32
//   leaf entry     = keylen:u16 key digest:32 has_pos:u8 offset:u64 length:u32
//   internal entry = keylen:u16 key child_page:u64
fn encode_page(node: &AuthNode, role: NodeType, children: &[u64]) -> Vec<u8> {
    let auth = node.annotation().expect("published nodes are committed");
    let mut out = vec![role.to_byte(), u8::from(!node.is_leaf())];
    out.extend_from_slice(&(node.len() as u16).to_le_bytes());
    for (i, key) in node.keys().iter().enumerate() {
        out.extend_from_slice(&(key.len() as u16).to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        match node.body() {
            Body::Leaf(values) => {
                let v = &values[i];
                out.extend_from_slice(&v.digest);
                let loc = v.location.unwrap_or(ValueLocation { offset: 0, length: 0 });
                out.push(u8::from(v.location.is_some()));
                out.extend_from_slice(&loc.offset.to_le_bytes());
                out.extend_from_slice(&loc.length.to_le_bytes());
            }
            Body::Internal(_) => out.extend_from_slice(&children[i].to_le_bytes()),
        }
    }
    out.extend_from_slice(&auth.commitment.to_bytes());
    out.extend_from_slice(&auth.node_hash);
    out
}

struct PageReader<'a> {
    bytes: &'a [u8],
}

impl<'a> PageReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(corrupt("truncated page"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_page(pages: &mut File, offset: u64) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    pages.seek(SeekFrom::Start(offset))?;
    pages.read_exact(&mut len).map_err(|_| corrupt(format!("page {offset} out of range")))?;
    let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
    pages.read_exact(&mut body).map_err(|_| corrupt(format!("page {offset} truncated")))?;
    Ok(body)
}

fn load_tree(
    pages: &mut File,
    params: &PublicParams,
    page: u64,
    page_of: &mut HashMap<NodeId, u64>,
) -> Result<AuthNode> {
    if page == NO_PAGE {
        return Ok(Node::new_leaf(Vec::new(), Vec::new()));
    }
    load_node(pages, params, page, true, page_of)
}

/// Loads a node and its subtree, recomputing each polynomial and checking
/// the stored hash against the stored commitment and role.
fn load_node(
    pages: &mut File,
    params: &PublicParams,
    offset: u64,
    is_root: bool,
    page_of: &mut HashMap<NodeId, u64>,
) -> Result<AuthNode> {
    let body = read_page(pages, offset)?;
    let mut r = PageReader { bytes: &body };
    let role = NodeType::from_byte(r.take(1)?[0]).ok_or_else(|| corrupt("bad node role"))?;
    let internal = match r.take(1)?[0] {
        0 => false,
        1 => true,
        _ => return Err(corrupt("bad node kind")),
    };
    let count = r.u16()? as usize;
    let mut keys = Vec::with_capacity(count);
    let mut values = Vec::new();
    let mut child_pages = Vec::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        keys.push(Key::new(r.take(len)?.to_vec()).map_err(|_| corrupt("oversized key"))?);
        if internal {
            child_pages.push(r.u64()?);
        } else {
            let digest: Digest = r.take(32)?.try_into().unwrap();
            let has_pos = r.take(1)?[0] == 1;
            let offset = r.u64()?;
            let length = r.u32()?;
            values.push(LeafValue { digest, location: has_pos.then_some(ValueLocation { offset, length }) });
        }
    }
    let commitment = Commitment::from_bytes(r.take(G1_BYTES)?).map_err(|e| corrupt(e.to_string()))?;
    let stored_hash: Digest = r.take(32)?.try_into().unwrap();
    if !r.bytes.is_empty() {
        return Err(corrupt("trailing bytes in page"));
    }

    let mut node = if internal {
        let children = child_pages
            .into_iter()
            .map(|p| load_node(pages, params, p, false, page_of).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Node::new_internal(keys, children)
    } else {
        Node::new_leaf(keys, values)
    };
    if role != node.node_type(is_root) {
        return Err(corrupt(format!("page {offset} has role {role:?} at the wrong position")));
    }
    if node_hash(&commitment, role) != stored_hash {
        return Err(corrupt(format!("page {offset} fails its node hash check")));
    }
    let auth = recommit_node(params, &node, role)?;
    if auth.commitment != commitment {
        return Err(corrupt(format!("page {offset} contents do not match its commitment")));
    }
    node.set_annotation(NodeAuth { commitment, node_hash: stored_hash, poly: auth.poly });
    page_of.insert(node.id(), offset);
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Arc<PublicParams> {
        Arc::new(PublicParams::test_mode(4, 3).unwrap())
    }

    #[test]
    fn value_log_entries() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::create(dir.path(), params(), 4).unwrap();
        let empty = s.put_value(b"").unwrap();
        assert_eq!(empty.length, 0);
        assert_eq!(empty.digest, hash(b""));

        let a = s.put_value(b"same").unwrap();
        let b = s.put_value(b"same").unwrap();
        assert_eq!(a.digest, b.digest);
        assert_ne!(a.offset, b.offset);

        let big: Vec<u8> = (0..1024u32).map(|i| (i * 31 % 251) as u8).collect();
        let e = s.put_value(&big).unwrap();
        let back = s.get_value(&e).unwrap();
        assert_eq!(back, big);
        assert_eq!(hash(&back), e.digest);
    }

    #[test]
    fn create_refuses_existing_store() {
        let dir = tempfile::tempdir().unwrap();
        Store::create(dir.path(), params(), 4).unwrap();
        assert!(Store::create(dir.path(), params(), 4).is_err());
    }
}
