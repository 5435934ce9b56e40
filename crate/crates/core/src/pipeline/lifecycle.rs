//! Deferred destruction: one queue per frame slot plus a main queue.

type Finalizer = Box<dyn FnOnce() + Send>;

/// Finalizers run in reverse registration order.
#[derive(Default)]
pub struct DeletionQueue {
    entries: Vec<(String, Finalizer)>,
}

impl DeletionQueue {
    pub fn push(&mut self, label: impl Into<String>, f: impl FnOnce() + Send + 'static) {
        self.entries.push((label.into(), Box::new(f)));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs and removes every finalizer, newest first; returns their labels in run order.
    pub fn flush(&mut self) -> Vec<String> {
        let mut ran = Vec::with_capacity(self.entries.len());
        while let Some((label, f)) = self.entries.pop() {
            f();
            ran.push(label);
        }
        ran
    }
}

impl std::fmt::Debug for DeletionQueue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.iter().map(|(l, _)| l)).finish()
    }
}

/// When a finalizer ran: at the start of a frame, or at shutdown (`None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalizerEvent {
    pub frame: Option<u64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LifecycleReport {
    pub registered: usize,
    pub ran: usize,
    pub events: Vec<FinalizerEvent>,
}

/// Two alternating frame slots. Slot `f % 2`'s queue is flushed when frame
/// `f + 2` begins; the main queue only at shutdown.
#[derive(Debug, Default)]
pub struct FrameResources {
    main: DeletionQueue,
    slots: [DeletionQueue; 2],
    current: Option<u64>,
    report: LifecycleReport,
}

impl FrameResources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn slot_of(frame: u64) -> usize {
        (frame % 2) as usize
    }

    /// Flushes the queue of the slot being reused and returns the slot index.
    pub fn begin_frame(&mut self, frame: u64) -> usize {
        let slot = Self::slot_of(frame);
        self.record(Some(frame), slot);
        self.current = Some(frame);
        slot
    }

    pub fn current_frame(&self) -> Option<u64> {
        self.current
    }

    /// Defers `f` until the current frame's slot is reused (or shutdown).
    pub fn defer_frame(&mut self, label: impl Into<String>, f: impl FnOnce() + Send + 'static) {
        let slot = Self::slot_of(self.current.unwrap_or(0));
        self.slots[slot].push(label, f);
        self.report.registered += 1;
    }

    pub fn defer_main(&mut self, label: impl Into<String>, f: impl FnOnce() + Send + 'static) {
        self.main.push(label, f);
        self.report.registered += 1;
    }

    pub fn pending(&self) -> usize {
        self.main.len() + self.slots[0].len() + self.slots[1].len()
    }

    fn record(&mut self, frame: Option<u64>, slot: usize) {
        for label in self.slots[slot].flush() {
            self.report.ran += 1;
            self.report.events.push(FinalizerEvent { frame, label });
        }
    }

    /// Flushes the older slot, the newer slot, then the main queue.
    pub fn shutdown(mut self) -> LifecycleReport {
        let newest = Self::slot_of(self.current.unwrap_or(0));
        self.record(None, 1 - newest);
        self.record(None, newest);
        for label in self.main.flush() {
            self.report.ran += 1;
            self.report.events.push(FinalizerEvent { frame: None, label });
        }
        std::mem::take(&mut self.report)
    }
}
