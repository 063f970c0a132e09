//! Filesystem seam for the dataset writer.
//!
//! Everything the recorder persists goes through [`Storage`], so tests can
//! observe when writes happen and inject disk failures.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::clock::SharedClock;

pub trait Storage: Send + Sync {
    fn create_dir_all(&self, path: &Path) -> io::Result<()>;
    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()>;
    fn rename(&self, from: &Path, to: &Path) -> io::Result<()>;
    fn remove_dir_all(&self, path: &Path) -> io::Result<()>;
    fn remove_file(&self, path: &Path) -> io::Result<()>;
    fn read(&self, path: &Path) -> io::Result<Vec<u8>>;
    fn exists(&self, path: &Path) -> bool;
}

pub type SharedStorage = Arc<dyn Storage>;

#[derive(Debug, Default, Clone, Copy)]
pub struct FsStorage;

impl FsStorage {
    pub fn shared() -> SharedStorage {
        Arc::new(FsStorage)
    }
}

impl Storage for FsStorage {
    fn create_dir_all(&self, path: &Path) -> io::Result<()> {
        std::fs::create_dir_all(path)
    }
    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        std::fs::write(path, bytes)
    }
    fn rename(&self, from: &Path, to: &Path) -> io::Result<()> {
        std::fs::rename(from, to)
    }
    fn remove_dir_all(&self, path: &Path) -> io::Result<()> {
        std::fs::remove_dir_all(path)
    }
    fn remove_file(&self, path: &Path) -> io::Result<()> {
        std::fs::remove_file(path)
    }
    fn read(&self, path: &Path) -> io::Result<Vec<u8>> {
        std::fs::read(path)
    }
    fn exists(&self, path: &Path) -> bool {
        path.exists()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageOp {
    CreateDir,
    Write,
    Rename,
    Remove,
    Read,
}

impl StorageOp {
    pub fn mutates(self) -> bool {
        !matches!(self, StorageOp::Read)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageCall {
    pub at_ns: u64,
    pub op: StorageOp,
    pub path: PathBuf,
}

/// Wraps a real filesystem, logging every call with the injected clock's time
/// and failing mutating calls whose path contains a configured fragment.
pub struct InstrumentedStorage {
    inner: FsStorage,
    clock: SharedClock,
    calls: Mutex<Vec<StorageCall>>,
    fail_fragment: Mutex<Option<String>>,
}

impl InstrumentedStorage {
    pub fn new(clock: SharedClock) -> Arc<Self> {
        Arc::new(Self { inner: FsStorage, clock, calls: Mutex::new(Vec::new()), fail_fragment: Mutex::new(None) })
    }

    /// Makes writes, renames and directory creation fail for matching paths.
    pub fn fail_paths_containing(&self, fragment: Option<&str>) {
        *self.fail_fragment.lock().unwrap() = fragment.map(str::to_string);
    }

    pub fn calls(&self) -> Vec<StorageCall> {
        self.calls.lock().unwrap().clone()
    }

    fn log(&self, op: StorageOp, path: &Path) -> io::Result<()> {
        self.calls.lock().unwrap().push(StorageCall { at_ns: self.clock.now_ns(), op, path: path.to_path_buf() });
        if op.mutates() {
            if let Some(f) = self.fail_fragment.lock().unwrap().as_deref() {
                if path.to_string_lossy().contains(f) {
                    return Err(io::Error::other(format!("injected failure on {}", path.display())));
                }
            }
        }
        Ok(())
    }
}

impl Storage for InstrumentedStorage {
    fn create_dir_all(&self, path: &Path) -> io::Result<()> {
        self.log(StorageOp::CreateDir, path)?;
        self.inner.create_dir_all(path)
    }
    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        self.log(StorageOp::Write, path)?;
        self.inner.write(path, bytes)
    }
    fn rename(&self, from: &Path, to: &Path) -> io::Result<()> {
        self.log(StorageOp::Rename, to)?;
        self.inner.rename(from, to)
    }
    fn remove_dir_all(&self, path: &Path) -> io::Result<()> {
        self.log(StorageOp::Remove, path)?;
        self.inner.remove_dir_all(path)
    }
    fn remove_file(&self, path: &Path) -> io::Result<()> {
        self.log(StorageOp::Remove, path)?;
        self.inner.remove_file(path)
    }
    fn read(&self, path: &Path) -> io::Result<Vec<u8>> {
        self.log(StorageOp::Read, path)?;
        self.inner.read(path)
    }
    fn exists(&self, path: &Path) -> bool {
        self.inner.exists(path)
    }
}
