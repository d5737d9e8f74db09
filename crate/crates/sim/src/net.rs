//! Link model: one-way latency per link plus serialisation at the sender's
//! interface, which transmits one frame at a time in FIFO order.

use std::collections::BTreeMap;

pub const NS_PER_MS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetConfig {
    /// One-way latency of every link unless overridden.
    pub latency_ns: u64,
    /// Per-interface bandwidth in bits per second.
    pub bandwidth_bps: u64,
    pub seed: u64,
    /// Per-link latency overrides, keyed by (sender, receiver).
    pub link_latency_ns: BTreeMap<(usize, usize), u64>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::new(100.0, 50.0)
    }
}

impl NetConfig {
    pub fn new(latency_ms: f64, bandwidth_mbps: f64) -> Self {
        assert!(latency_ms >= 0.0, "latency must not be negative");
        assert!(bandwidth_mbps > 0.0, "bandwidth must be positive");
        NetConfig {
            latency_ns: (latency_ms * NS_PER_MS as f64).round() as u64,
            bandwidth_bps: (bandwidth_mbps * 1e6).round() as u64,
            seed: 0,
            link_latency_ns: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn latency(&self, from: usize, to: usize) -> u64 {
        self.link_latency_ns
            .get(&(from, to))
            .copied()
            .unwrap_or(self.latency_ns)
    }

    /// Time to put `bytes` on the wire, rounded up to whole nanoseconds.
    pub fn transmission_ns(&self, bytes: usize) -> u64 {
        let bits = bytes as u128 * 8 * 1_000_000_000;
        bits.div_ceil(self.bandwidth_bps as u128) as u64
    }
}

/// A sender's outgoing interface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Interface {
    /// When the frame currently being transmitted leaves the interface.
    pub free_at: u64,
}

impl Interface {
    /// Queues a frame handed over at `send_time` and returns its delivery time.
    pub fn deliver(
        &mut self,
        send_time: u64,
        bytes: usize,
        latency_ns: u64,
        config: &NetConfig,
    ) -> u64 {
        let start = send_time.max(self.free_at);
        self.free_at = start + config.transmission_ns(bytes);
        self.free_at + latency_ns
    }

    /// Delivery times of one frame sent to each receiver in turn.
    pub fn broadcast(
        &mut self,
        send_time: u64,
        from: usize,
        receivers: &[usize],
        bytes: usize,
        config: &NetConfig,
    ) -> Vec<(usize, u64)> {
        receivers
            .iter()
            .map(|to| {
                (
                    *to,
                    self.deliver(send_time, bytes, config.latency(from, *to), config),
                )
            })
            .collect()
    }
}
