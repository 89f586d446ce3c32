/// A payload travelling through a delay channel.
#[derive(Debug, Clone, PartialEq)]
pub struct InTransit<P> {
    pub payload: P,
    pub generated_at: usize,
    pub release_at: usize,
}

/// Queue of in-transit payloads keyed by release time.
#[derive(Debug, Clone)]
pub struct DelayChannel<P> {
    entries: Vec<InTransit<P>>,
}

impl<P> Default for DelayChannel<P> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<P> DelayChannel<P> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sends with `release_at = generated_at + delay`.
    pub fn send(&mut self, payload: P, generated_at: usize, delay: usize) {
        self.send_until(payload, generated_at, generated_at + delay);
    }

    /// Sends with an explicit release time, for payloads whose generation
    /// index is not a wall-clock time.
    pub fn send_until(&mut self, payload: P, generated_at: usize, release_at: usize) {
        self.entries.push(InTransit {
            payload,
            generated_at,
            release_at,
        });
    }

    /// Removes every entry with `release_at <= now`, oldest generation first.
    pub fn drain_ready(&mut self, now: usize) -> Vec<InTransit<P>> {
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|e| e.release_at <= now);
        self.entries = waiting;
        let mut ready = ready;
        ready.sort_by_key(|e| e.generated_at);
        ready
    }

    /// Removes everything regardless of release time, oldest generation first.
    pub fn flush(&mut self) -> Vec<InTransit<P>> {
        let mut all = std::mem::take(&mut self.entries);
        all.sort_by_key(|e| e.generated_at);
        all
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &InTransit<P>> {
        self.entries.iter()
    }
}
