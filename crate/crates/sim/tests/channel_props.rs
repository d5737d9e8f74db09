use std::collections::BTreeMap;
use std::sync::Arc;

use dcnet_core::envelope::{Body, Envelope};
use dcnet_core::node::{Input, Node, OpCounts, Output};
use dcnet_sim::{CostModel, NetConfig, Simulator};
use proptest::prelude::*;

/// Sends a scripted burst at setup and records what it receives. Every receive
/// costs a point addition so busy members queue their input.
struct Chatter {
    id: usize,
    script: Vec<(usize, usize)>,
    received: Arc<std::sync::Mutex<Vec<(usize, usize, u32)>>>,
    ops: OpCounts,
}

impl Node for Chatter {
    fn id(&self) -> usize {
        self.id
    }

    fn handle(&mut self, input: Input) -> Vec<Output> {
        match input {
            Input::Setup => {
                let mut out = vec![Output::Ready];
                for (seq, (to, len)) in self.script.iter().enumerate() {
                    let mut body = (seq as u32).to_be_bytes().to_vec();
                    body.resize(4 + len, 0);
                    let env = Envelope::new(seq as u32, self.id, Body::Control(body));
                    out.push(Output::Send {
                        to: *to,
                        envelope: Arc::new(env),
                    });
                }
                out
            }
            Input::Receive(env) => {
                self.ops.point_additions += 1;
                let Body::Control(b) = &env.body else {
                    panic!("unexpected body")
                };
                let seq = u32::from_be_bytes(b[..4].try_into().unwrap());
                self.received
                    .lock()
                    .unwrap()
                    .push((env.sender as usize, self.id, seq));
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    fn ops(&self) -> OpCounts {
        self.ops
    }

    fn busy(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        format!("chatter {}", self.id)
    }
}

fn scripts(k: usize) -> impl Strategy<Value = Vec<Vec<(usize, usize)>>> {
    prop::collection::vec(prop::collection::vec((0..k - 1, 0usize..5000), 0..25), k).prop_map(
        move |v| {
            // Map peer choices past the sender's own id.
            v.into_iter()
                .enumerate()
                .map(|(me, s)| {
                    s.into_iter()
                        .map(|(p, len)| (if p >= me { p + 1 } else { p }, len))
                        .collect()
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every envelope arrives exactly once and each sender-receiver pair sees
    /// its envelopes in sending order.
    #[test]
    fn channels_are_reliable_and_fifo(
        scripts in scripts(4),
        latency in 0.0f64..200.0,
        bandwidth in 1.0f64..100.0,
        add_ns in 0u64..2_000_000,
    ) {
        let received = Arc::new(std::sync::Mutex::new(Vec::new()));
        let nodes: Vec<Box<dyn Node>> = scripts
            .iter()
            .enumerate()
            .map(|(id, s)| Box::new(Chatter { id, script: s.clone(), received: received.clone(), ops: OpCounts::default() }) as Box<dyn Node>)
            .collect();
        let cost = CostModel { scalar_mul_ns: 0, point_add_ns: add_ns, threads: 1 };
        let mut sim = Simulator::new(nodes, NetConfig::new(latency, bandwidth), cost);
        for i in 0..4 {
            sim.schedule(0, i, Input::Setup);
        }
        sim.run().unwrap();
        let log = sim.into_log();

        let mut expected: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
        let mut bytes = [0u64; 4];
        for (from, s) in scripts.iter().enumerate() {
            for (seq, (to, len)) in s.iter().enumerate() {
                expected.entry((from, *to)).or_default().push(seq as u32);
                bytes[from] += (11 + 4 + len) as u64;
            }
        }
        let mut got: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
        for (from, to, seq) in received.lock().unwrap().iter() {
            got.entry((*from, *to)).or_default().push(*seq);
        }
        prop_assert_eq!(got, expected);
        for (n, b) in bytes.iter().enumerate() {
            prop_assert_eq!(log.nodes[n].bytes_sent, *b);
        }
    }
}
