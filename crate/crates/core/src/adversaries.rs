//! Scripted red agents.
//!
//! B_line knows the network layout and follows a fixed pivot route
//! User0 -> Enterprise0 -> Enterprise2 -> OpServer0; Meander discovers
//! and owns each subnet breadth-first before advancing. Both observe
//! only the outcome of their own previous action and rebuild their
//! belief about lost access from failures.

use crate::netsim::{
    AccessLevel, HostId, HostSet, RedAction, RedOutcome, StepEvents, Subnet,
};

/// Consecutive failures of one action before an agent assumes its
/// access upstream was lost rather than bad luck.
const RETRY_LIMIT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedAgentKind {
    Bline,
    Meander,
    Sleep,
}

impl RedAgentKind {
    pub fn name(self) -> &'static str {
        match self {
            RedAgentKind::Bline => "bline",
            RedAgentKind::Meander => "meander",
            RedAgentKind::Sleep => "sleep",
        }
    }

    pub fn from_name(name: &str) -> Option<RedAgentKind> {
        match name {
            "bline" => Some(RedAgentKind::Bline),
            "meander" => Some(RedAgentKind::Meander),
            "sleep" => Some(RedAgentKind::Sleep),
            _ => None,
        }
    }
}

/// Common driver interface for the scripted attackers.
pub trait RedAgent {
    /// Choose the next action given the outcome of the previous one
    /// (`None` on the first step of an episode).
    fn next_action(&mut self, last: Option<&StepEvents>) -> RedAction;

    fn reset(&mut self);
}

/// Instantiate an agent by kind.
pub fn make_agent(kind: RedAgentKind) -> alloc::boxed::Box<dyn RedAgent> {
    match kind {
        RedAgentKind::Bline => alloc::boxed::Box::new(BlineAgent::new()),
        RedAgentKind::Meander => alloc::boxed::Box::new(MeanderAgent::new()),
        RedAgentKind::Sleep => alloc::boxed::Box::new(SleepAgent),
    }
}

/// Always sleeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct SleepAgent;

impl RedAgent for SleepAgent {
    fn next_action(&mut self, _last: Option<&StepEvents>) -> RedAction {
        RedAction::Sleep
    }

    fn reset(&mut self) {}
}

// ---------------------------------------------------------------------------
// B_line
// ---------------------------------------------------------------------------

/// The fixed twelve-stage exploitation plan. The emitted stage is always
/// the earliest whose postcondition is unsatisfied in the agent's belief,
/// so success advances and detected access loss regresses automatically.
const BLINE_PLAN: [RedAction; 12] = [
    RedAction::ScanServices(HostId::USER0),
    RedAction::Escalate(HostId::USER0),
    RedAction::ScanServices(HostId::ENTERPRISE0),
    RedAction::Exploit(HostId::ENTERPRISE0),
    RedAction::Escalate(HostId::ENTERPRISE0),
    RedAction::ScanServices(HostId::ENTERPRISE2),
    RedAction::Exploit(HostId::ENTERPRISE2),
    RedAction::Escalate(HostId::ENTERPRISE2),
    RedAction::ScanServices(HostId::OP_SERVER0),
    RedAction::Exploit(HostId::OP_SERVER0),
    RedAction::Escalate(HostId::OP_SERVER0),
    RedAction::Impact,
];

/// B_line's belief about the world, rebuilt only from its own outcomes.
#[derive(Debug, Clone)]
pub struct BlineMemory {
    pub believed_access: [AccessLevel; crate::netsim::NUM_HOSTS],
    pub believed_scanned: HostSet,
    pub retries: u32,
    last_action: Option<RedAction>,
}

impl Default for BlineMemory {
    fn default() -> Self {
        let mut believed_access = [AccessLevel::None; crate::netsim::NUM_HOSTS];
        believed_access[HostId::USER0.index()] = AccessLevel::User;
        BlineMemory {
            believed_access,
            believed_scanned: HostSet::EMPTY,
            retries: 0,
            last_action: None,
        }
    }
}

impl BlineMemory {
    /// Stage postcondition against the current belief.
    fn stage_done(&self, stage: usize) -> bool {
        let access = |h: HostId| self.believed_access[h.index()];
        match stage {
            0 => self.believed_scanned.contains(HostId::USER0),
            1 => access(HostId::USER0) == AccessLevel::Admin,
            2 => self.believed_scanned.contains(HostId::ENTERPRISE0),
            3 => access(HostId::ENTERPRISE0) >= AccessLevel::User,
            4 => access(HostId::ENTERPRISE0) == AccessLevel::Admin,
            5 => self.believed_scanned.contains(HostId::ENTERPRISE2),
            6 => access(HostId::ENTERPRISE2) >= AccessLevel::User,
            7 => access(HostId::ENTERPRISE2) == AccessLevel::Admin,
            8 => self.believed_scanned.contains(HostId::OP_SERVER0),
            9 => access(HostId::OP_SERVER0) >= AccessLevel::User,
            10 => access(HostId::OP_SERVER0) == AccessLevel::Admin,
            // Impact repeats for as long as admin on the op server holds.
            _ => false,
        }
    }

    pub fn stage(&self) -> usize {
        (0..BLINE_PLAN.len())
            .find(|&s| !self.stage_done(s))
            .unwrap_or(BLINE_PLAN.len() - 1)
    }

    fn absorb_outcome(&mut self, events: &StepEvents) {
        let Some(action) = self.last_action else {
            return;
        };
        match events.red_outcome {
            RedOutcome::Succeeded => {
                self.retries = 0;
                match action {
                    RedAction::ScanServices(h) => self.believed_scanned.insert(h),
                    RedAction::Exploit(h) => {
                        if self.believed_access[h.index()] == AccessLevel::None {
                            self.believed_access[h.index()] = AccessLevel::User;
                        }
                    }
                    RedAction::Escalate(h) => {
                        self.believed_access[h.index()] = AccessLevel::Admin;
                    }
                    _ => {}
                }
            }
            RedOutcome::Failed | RedOutcome::AbsorbedByDecoy => match action {
                RedAction::Escalate(h) => {
                    // Escalation is deterministic: failure means the
                    // access it relied on is gone.
                    self.believed_access[h.index()] = if h == HostId::USER0 {
                        AccessLevel::User
                    } else {
                        AccessLevel::None
                    };
                    self.retries = 0;
                }
                RedAction::Impact => {
                    self.believed_access[HostId::OP_SERVER0.index()] = AccessLevel::None;
                    self.retries = 0;
                }
                RedAction::Exploit(_) | RedAction::ScanServices(_) => {
                    self.retries += 1;
                    if self.retries > RETRY_LIMIT {
                        // Persistent failure: assume the pivot chain was
                        // cut somewhere and re-derive it from the foothold.
                        // Scan knowledge survives (red never forgets).
                        for h in HostId::all() {
                            self.believed_access[h.index()] = if h == HostId::USER0 {
                                AccessLevel::User
                            } else {
                                AccessLevel::None
                            };
                        }
                        self.retries = 0;
                    }
                }
                _ => {}
            },
            RedOutcome::Slept => {}
        }
    }
}

/// Red agent with prior knowledge of the layout; never discovers.
#[derive(Debug, Clone, Default)]
pub struct BlineAgent {
    pub mem: BlineMemory,
}

impl BlineAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RedAgent for BlineAgent {
    fn next_action(&mut self, last: Option<&StepEvents>) -> RedAction {
        if let Some(events) = last {
            self.mem.absorb_outcome(events);
        }
        let action = BLINE_PLAN[self.mem.stage()];
        self.mem.last_action = Some(action);
        action
    }

    fn reset(&mut self) {
        self.mem = BlineMemory::default();
    }
}

// ---------------------------------------------------------------------------
// Meander
// ---------------------------------------------------------------------------

/// Meander's accumulated knowledge. Sets shrink only when a failed
/// action reveals lost access.
#[derive(Debug, Clone)]
pub struct MeanderMemory {
    pub discovered: HostSet,
    pub scanned: HostSet,
    pub owned_user: HostSet,
    pub owned_admin: HostSet,
    pub current_subnet: Subnet,
    retries: u32,
    last_action: Option<RedAction>,
}

impl Default for MeanderMemory {
    fn default() -> Self {
        let mut owned_user = HostSet::EMPTY;
        owned_user.insert(HostId::USER0);
        let mut discovered = HostSet::EMPTY;
        discovered.insert(HostId::USER0);
        MeanderMemory {
            discovered,
            scanned: HostSet::EMPTY,
            owned_user,
            owned_admin: HostSet::EMPTY,
            current_subnet: Subnet::User,
            retries: 0,
            last_action: None,
        }
    }
}

impl MeanderMemory {
    fn absorb_outcome(&mut self, events: &StepEvents) {
        let Some(action) = self.last_action else {
            return;
        };
        match events.red_outcome {
            RedOutcome::Succeeded => {
                self.retries = 0;
                match action {
                    RedAction::DiscoverHosts(subnet) => {
                        self.discovered = self.discovered.union(HostSet::of_subnet(subnet));
                    }
                    RedAction::ScanServices(h) => self.scanned.insert(h),
                    RedAction::Exploit(h) => self.owned_user.insert(h),
                    RedAction::Escalate(h) => {
                        self.owned_user.insert(h);
                        self.owned_admin.insert(h);
                    }
                    _ => {}
                }
            }
            RedOutcome::Failed | RedOutcome::AbsorbedByDecoy => match action {
                RedAction::Escalate(h) => {
                    self.lose(h);
                    self.retries = 0;
                }
                RedAction::Impact => {
                    self.lose(HostId::OP_SERVER0);
                    self.retries = 0;
                }
                _ => {
                    self.retries += 1;
                    if self.retries > RETRY_LIMIT {
                        // Something upstream was cleaned; fall back to the
                        // foothold and re-derive ownership from scratch.
                        self.owned_user = HostSet::EMPTY;
                        self.owned_user.insert(HostId::USER0);
                        self.owned_admin = HostSet::EMPTY;
                        self.current_subnet = Subnet::User;
                        self.retries = 0;
                    }
                }
            },
            RedOutcome::Slept => {}
        }
    }

    fn lose(&mut self, h: HostId) {
        if h == HostId::USER0 {
            self.owned_admin.remove(h);
        } else {
            self.owned_user.remove(h);
            self.owned_admin.remove(h);
        }
    }

    /// Lowest-id member of `set` restricted to the current subnet.
    fn lowest_in_subnet(&self, set: HostSet) -> Option<HostId> {
        HostSet::of_subnet(self.current_subnet)
            .iter()
            .find(|h| set.contains(*h))
    }

    fn decide(&mut self) -> RedAction {
        if self.owned_admin.contains(HostId::OP_SERVER0) {
            return RedAction::Impact;
        }
        loop {
            let subnet_hosts = HostSet::of_subnet(self.current_subnet);
            if !self.discovered.contains_all(subnet_hosts) {
                return RedAction::DiscoverHosts(self.current_subnet);
            }
            let unscanned: HostSet =
                self.discovered.iter().filter(|h| !self.scanned.contains(*h)).collect();
            if let Some(h) = self.lowest_in_subnet(unscanned) {
                return RedAction::ScanServices(h);
            }
            let unowned: HostSet =
                self.scanned.iter().filter(|h| !self.owned_user.contains(*h)).collect();
            if let Some(h) = self.lowest_in_subnet(unowned) {
                return RedAction::Exploit(h);
            }
            let unescalated: HostSet = self
                .owned_user
                .iter()
                .filter(|h| !self.owned_admin.contains(*h))
                .collect();
            if let Some(h) = self.lowest_in_subnet(unescalated) {
                return RedAction::Escalate(h);
            }
            match self.current_subnet {
                Subnet::User => self.current_subnet = Subnet::Enterprise,
                Subnet::Enterprise => self.current_subnet = Subnet::Operational,
                Subnet::Operational => return RedAction::Sleep,
            }
        }
    }
}

/// Exploratory red agent without prior knowledge; propagates subnet by
/// subnet, lowest host id first.
#[derive(Debug, Clone, Default)]
pub struct MeanderAgent {
    pub mem: MeanderMemory,
}

impl MeanderAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RedAgent for MeanderAgent {
    fn next_action(&mut self, last: Option<&StepEvents>) -> RedAction {
        if let Some(events) = last {
            self.mem.absorb_outcome(events);
        }
        let action = self.mem.decide();
        self.mem.last_action = Some(action);
        action
    }

    fn reset(&mut self) {
        self.mem = MeanderMemory::default();
    }
}

/// Run a scripted red agent against an inert defender and report the
/// step index of the first successful Impact, if any. Used as the
/// regression oracle for the plan constants.
pub fn first_impact_step(
    kind: RedAgentKind,
    config: crate::netsim::SimConfig,
) -> Option<u32> {
    let mut agent = make_agent(kind);
    let mut state = crate::netsim::build_network(config).ok()?;
    let mut last: Option<StepEvents> = None;
    while !state.is_done() {
        let red = agent.next_action(last.as_ref());
        let step = state.step;
        let (_, events) = state.step(crate::netsim::BlueAction::Sleep, red).ok()?;
        if events.impact_occurred {
            return Some(step);
        }
        last = Some(events);
    }
    None
}
