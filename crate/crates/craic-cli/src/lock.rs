//! Work-directory lock. Concurrent invocations on the same work directory
//! are rejected rather than serialized.

use crate::error::CliError;
use std::io::Write;
use std::path::PathBuf;

const LOCK_NAME: &str = ".craic.lock";

pub struct WorkLock {
    path: PathBuf,
}

impl WorkLock {
    pub fn acquire(work: &std::path::Path) -> Result<WorkLock, CliError> {
        std::fs::create_dir_all(work)?;
        let path = work.join(LOCK_NAME);
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(WorkLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::LockHeld(path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WorkLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_acquire_fails_until_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = WorkLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            WorkLock::acquire(dir.path()),
            Err(CliError::LockHeld(_))
        ));
        drop(lock);
        assert!(WorkLock::acquire(dir.path()).is_ok());
    }
}
