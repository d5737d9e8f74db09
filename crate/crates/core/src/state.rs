//! Per-node lifecycle: when to run rounds, which mode to run them in, and
//! what to do about attack evidence and confirmed blames.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::blame::{build_blame, BlameMessage, Outcome, Verdict};
use crate::crypto::Seed;
use crate::init::SecurityMode;

/// Clean secured instances required before falling back to unsecured mode.
pub const DEFAULT_CLEAN_WINDOW: u32 = 3;
/// Collision flags in one round that count as an attack.
pub const DEFAULT_COLLISION_THRESHOLD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    GroupInit,
    Idle,
    InitialRound,
    FinalRound,
    Excluding,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::GroupInit => "GROUP_INIT",
            Phase::Idle => "IDLE",
            Phase::InitialRound => "INITIAL_ROUND",
            Phase::FinalRound => "FINAL_ROUND",
            Phase::Excluding => "EXCLUDING",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModePolicy {
    /// Start unsecured, escalate on evidence, fall back after a clean window.
    #[default]
    Auto,
    AlwaysSecured,
    AlwaysUnsecured,
}

impl ModePolicy {
    fn initial_mode(self) -> SecurityMode {
        match self {
            ModePolicy::AlwaysSecured => SecurityMode::Secured,
            ModePolicy::Auto | ModePolicy::AlwaysUnsecured => SecurityMode::Unsecured,
        }
    }
}

/// Public facts about one finished round, identical on every honest node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundSummary {
    pub occupied: usize,
    /// Reservations whose content is visibly broken (undecodable slots or
    /// final-round entries).
    pub collisions: usize,
    pub malformed: usize,
    /// The round result as a whole is unusable, or a member reported damage.
    pub garbage: bool,
    pub blames: usize,
    /// Some slot announced a length, so a final round follows.
    pub any_length: bool,
}

impl RoundSummary {
    pub fn is_clean(&self) -> bool {
        self.collisions == 0 && self.malformed == 0 && !self.garbage && self.blames == 0
    }
}

/// A blame raised after a final round, waiting for the next initial round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingBlame {
    /// Instance whose final round was attacked.
    pub instance: u64,
    /// Roster position of the accused.
    pub accused: usize,
    pub slot: usize,
    pub seed: Seed,
}

impl PendingBlame {
    /// The blame as carried in instance `current`; `None` once the offset no
    /// longer fits.
    pub fn message(&self, current: u64) -> Option<BlameMessage> {
        let offset = u16::try_from(current.checked_sub(self.instance)?).ok()?;
        (offset > 0).then(|| build_blame(self.accused, self.seed, self.slot, offset))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    GroupReady,
    Timer,
    RoundComplete(RoundSummary),
    BlameVerdict(Verdict),
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::GroupReady => "GROUP_READY",
            Event::Timer => "TIMER",
            Event::RoundComplete(_) => "ROUND_COMPLETE",
            Event::BlameVerdict(v) => match v.outcome {
                Outcome::AttackerConfirmed => "ATTACKER_CONFIRMED",
                Outcome::BlameInvalid => "BLAME_INVALID",
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    ScheduleTimer,
    StartInitialRound {
        instance: u64,
        mode: SecurityMode,
    },
    StartFinalRound {
        instance: u64,
        mode: SecurityMode,
    },
    /// The current instance ends without (further) rounds.
    AbortInstance {
        instance: u64,
    },
    /// The instance finished normally.
    CompleteInstance {
        instance: u64,
    },
    Exclude {
        member: usize,
    },
    /// Form a new group from the remaining roster.
    ReinitGroup {
        roster: Vec<usize>,
    },
    Log(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no transition from {phase} on {event}")]
pub struct TransitionError {
    pub phase: &'static str,
    pub event: &'static str,
}

pub fn detect_attack(summary: &RoundSummary, k: usize, collision_threshold: usize) -> bool {
    summary.occupied > k || summary.collisions >= collision_threshold || summary.garbage
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub node: usize,
    pub phase: Phase,
    pub mode: SecurityMode,
    pub policy: ModePolicy,
    /// Member ids in the agreed order.
    pub roster: Vec<usize>,
    pub original_roster: Vec<usize>,
    pub excluded: BTreeSet<usize>,
    pub pending_blames: VecDeque<PendingBlame>,
    /// Instances started so far; the current one while a round runs.
    pub instance: u64,
    pub clean_window: u32,
    pub collision_threshold: usize,
    clean_streak: u32,
    instance_dirty: bool,
    pending_exclusion: Option<usize>,
}

impl NodeState {
    pub fn new(node: usize, roster: Vec<usize>, policy: ModePolicy) -> Self {
        NodeState {
            node,
            phase: Phase::GroupInit,
            mode: policy.initial_mode(),
            policy,
            original_roster: roster.clone(),
            roster,
            excluded: BTreeSet::new(),
            pending_blames: VecDeque::new(),
            instance: 0,
            clean_window: DEFAULT_CLEAN_WINDOW,
            collision_threshold: DEFAULT_COLLISION_THRESHOLD,
            clean_streak: 0,
            instance_dirty: false,
            pending_exclusion: None,
        }
    }

    pub fn k(&self) -> usize {
        self.roster.len()
    }

    pub fn clean_streak(&self) -> u32 {
        self.clean_streak
    }

    pub fn log_line(&self, event: &str) -> String {
        format!(
            "round={} node={} phase={} mode={} event={}",
            self.instance,
            self.node,
            self.phase.as_str(),
            self.mode.as_str(),
            event
        )
    }

    fn log(&self, actions: &mut Vec<Action>, event: &str) {
        actions.push(Action::Log(self.log_line(event)));
    }

    fn escalate(&mut self, actions: &mut Vec<Action>) {
        self.instance_dirty = true;
        self.clean_streak = 0;
        if self.mode == SecurityMode::Unsecured && self.policy == ModePolicy::Auto {
            self.mode = SecurityMode::Secured;
            self.log(actions, "ESCALATE");
        }
    }

    /// Bookkeeping when an instance ends without exclusion.
    fn finish_instance(&mut self, actions: &mut Vec<Action>, aborted: bool) {
        let instance = self.instance;
        if self.mode == SecurityMode::Secured && !self.instance_dirty {
            self.clean_streak += 1;
            if self.policy == ModePolicy::Auto && self.clean_streak >= self.clean_window {
                self.mode = SecurityMode::Unsecured;
                self.clean_streak = 0;
                self.log(actions, "DEESCALATE");
            }
        }
        self.instance_dirty = false;
        self.phase = Phase::Idle;
        actions.push(if aborted {
            Action::AbortInstance { instance }
        } else {
            Action::CompleteInstance { instance }
        });
        actions.push(Action::ScheduleTimer);
    }

    pub fn step(&mut self, event: Event) -> Result<Vec<Action>, TransitionError> {
        let mut actions = Vec::new();
        let name = event.name();
        match (self.phase, event) {
            (Phase::GroupInit, Event::GroupReady) => {
                self.phase = Phase::Idle;
                self.log(&mut actions, name);
                actions.push(Action::ScheduleTimer);
            }
            (Phase::Idle, Event::Timer) => {
                self.instance += 1;
                self.phase = Phase::InitialRound;
                self.log(&mut actions, name);
                actions.push(Action::StartInitialRound {
                    instance: self.instance,
                    mode: self.mode,
                });
            }
            (Phase::InitialRound, Event::BlameVerdict(v)) => {
                self.instance_dirty = true;
                if v.outcome == Outcome::AttackerConfirmed && self.pending_exclusion.is_none() {
                    self.pending_exclusion = Some(v.accused);
                    self.phase = Phase::Excluding;
                }
                self.log(&mut actions, name);
            }
            (Phase::Excluding, Event::BlameVerdict(_)) => {
                // One exclusion per instance; further verdicts wait for the new group.
                self.log(&mut actions, name);
            }
            (Phase::InitialRound, Event::RoundComplete(s)) => {
                self.log(&mut actions, name);
                let attack = detect_attack(&s, self.k(), self.collision_threshold);
                if !s.is_clean() || attack {
                    self.instance_dirty = true;
                    self.clean_streak = 0;
                }
                if attack && self.mode == SecurityMode::Unsecured {
                    // The final round of a suspicious unsecured instance is skipped.
                    self.escalate(&mut actions);
                    self.finish_instance(&mut actions, true);
                } else if s.any_length {
                    self.phase = Phase::FinalRound;
                    actions.push(Action::StartFinalRound {
                        instance: self.instance,
                        mode: self.mode,
                    });
                } else {
                    self.finish_instance(&mut actions, false);
                }
            }
            (Phase::Excluding, Event::RoundComplete(_)) => {
                let accused = self
                    .pending_exclusion
                    .take()
                    .expect("excluding without an accused member");
                self.excluded.insert(accused);
                self.roster.retain(|m| *m != accused);
                self.log(&mut actions, &format!("EXCLUDE:{accused}"));
                actions.push(Action::AbortInstance {
                    instance: self.instance,
                });
                actions.push(Action::Exclude { member: accused });
                self.phase = Phase::GroupInit;
                self.pending_blames.clear();
                self.clean_streak = 0;
                self.instance_dirty = false;
                self.mode = self.policy.initial_mode();
                self.log(&mut actions, "REINIT");
                actions.push(Action::ReinitGroup {
                    roster: self.roster.clone(),
                });
            }
            (Phase::FinalRound, Event::RoundComplete(s)) => {
                self.log(&mut actions, name);
                if detect_attack(&s, self.k(), self.collision_threshold) {
                    self.escalate(&mut actions);
                } else if !s.is_clean() {
                    self.instance_dirty = true;
                    self.clean_streak = 0;
                }
                self.finish_instance(&mut actions, false);
            }
            (phase, event) => {
                return Err(TransitionError {
                    phase: phase.as_str(),
                    event: event.name(),
                })
            }
        }
        Ok(actions)
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node={} phase={} mode={} instance={} roster={:?}",
            self.node,
            self.phase.as_str(),
            self.mode.as_str(),
            self.instance,
            self.roster
        )
    }
}
