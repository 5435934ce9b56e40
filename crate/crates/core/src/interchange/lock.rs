//! Cross-process lock word: 0 when free, otherwise the holder's pid.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::{Duration, Instant};

pub(crate) struct LockWord<'a> {
    word: &'a AtomicU32,
}

pub(crate) fn current_pid() -> u32 {
    std::process::id()
}

fn process_alive(pid: u32) -> bool {
    // SAFETY: signal 0 only performs the existence/permission check.
    let r = unsafe { libc::kill(pid as libc::pid_t, 0) };
    r == 0 || std::io::Error::last_os_error().raw_os_error() != Some(libc::ESRCH)
}

impl<'a> LockWord<'a> {
    /// # Safety
    /// `ptr` must be 4-byte aligned and valid for the lifetime `'a`.
    pub(crate) unsafe fn from_ptr(ptr: *mut u8) -> Self {
        LockWord { word: AtomicU32::from_ptr(ptr as *mut u32) }
    }

    /// One acquisition attempt, reclaiming the word if its holder has died.
    pub(crate) fn try_lock(&self) -> bool {
        let me = current_pid();
        match self.word.compare_exchange(0, me, Ordering::Acquire, Ordering::Relaxed) {
            Ok(_) => true,
            Err(owner) if owner != me && !process_alive(owner) => {
                self.word.compare_exchange(owner, me, Ordering::Acquire, Ordering::Relaxed).is_ok()
            }
            Err(_) => false,
        }
    }

    /// Spins (then yields) for up to `spins` attempts.
    pub(crate) fn lock_spinning(&self, spins: usize) -> bool {
        for i in 0..spins {
            if self.try_lock() {
                return true;
            }
            if i % 64 == 63 {
                std::thread::yield_now();
            } else {
                std::hint::spin_loop();
            }
        }
        false
    }

    pub(crate) fn lock_timeout(&self, timeout: Duration) -> bool {
        let start = Instant::now();
        loop {
            if self.lock_spinning(256) {
                return true;
            }
            if start.elapsed() > timeout {
                return false;
            }
        }
    }

    pub(crate) fn unlock(&self) {
        self.word.store(0, Ordering::Release);
    }
}
