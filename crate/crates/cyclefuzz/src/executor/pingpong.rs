//! Two-slot staging buffer for the pipelined executor.
//!
//! The coordinator hands work for iteration `k` to one slot while iteration
//! `k+1` fills the other; slots are addressed by iteration parity. Putting
//! into an occupied slot or taking from an empty one is a scheduling bug,
//! so both panic.

#[derive(Debug)]
pub struct PingPong<T> {
    slots: [Option<T>; 2],
}

impl<T> PingPong<T> {
    pub fn new() -> Self {
        PingPong {
            slots: [None, None],
        }
    }

    pub fn put(&mut self, phase: u64, value: T) {
        let slot = &mut self.slots[(phase % 2) as usize];
        assert!(
            slot.is_none(),
            "ping-pong slot {} is still occupied at phase {phase}",
            phase % 2
        );
        *slot = Some(value);
    }

    pub fn take(&mut self, phase: u64) -> T {
        self.slots[(phase % 2) as usize]
            .take()
            .unwrap_or_else(|| panic!("ping-pong slot {} is empty at phase {phase}", phase % 2))
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }
}

impl<T> Default for PingPong<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_alternate_between_slots() {
        let mut pp = PingPong::new();
        pp.put(4, "a");
        pp.put(5, "b");
        assert_eq!(pp.take(4), "a");
        pp.put(6, "c");
        assert_eq!(pp.take(5), "b");
        assert_eq!(pp.take(6), "c");
        assert!(pp.is_empty());
    }

    #[test]
    #[should_panic(expected = "still occupied")]
    fn double_put_on_one_parity_panics() {
        let mut pp = PingPong::new();
        pp.put(2, 1);
        pp.put(4, 2);
    }

    #[test]
    #[should_panic(expected = "is empty")]
    fn take_from_empty_slot_panics() {
        let mut pp: PingPong<u32> = PingPong::new();
        pp.take(3);
    }
}
