//! Turn-based network-defence game engine.
//!
//! The network has 13 hosts across three subnets in a fixed canonical
//! order: User0..User4 (0-4), Enterprise0..Enterprise2 (5-7), Defender
//! (8), OpServer0 (9), OpHost0..OpHost2 (10-12). Red holds a permanent
//! foothold on User0. Each step resolves the red action first, then the
//! blue action, then computes the (always non-positive) reward and the
//! defender's 52-bit observation.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of hosts in the scenario network.
pub const NUM_HOSTS: usize = 13;
/// Observation width: 4 bits per host.
pub const OBS_BITS: usize = 4 * NUM_HOSTS;
/// Flat blue action count: Sleep, Monitor, plus 4 per-host actions.
pub const NUM_BLUE_ACTIONS: usize = 2 + 4 * NUM_HOSTS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("episode already complete (step {step} >= horizon {horizon})")]
    EpisodeComplete { step: u32, horizon: u32 },
    #[error("invalid action index {index} (valid range 0..{limit})")]
    InvalidActionIndex { index: usize, limit: usize },
}

/// Index of a host in the canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(u8);

impl HostId {
    pub const USER0: HostId = HostId(0);
    pub const USER1: HostId = HostId(1);
    pub const USER2: HostId = HostId(2);
    pub const USER3: HostId = HostId(3);
    pub const USER4: HostId = HostId(4);
    pub const ENTERPRISE0: HostId = HostId(5);
    pub const ENTERPRISE1: HostId = HostId(6);
    pub const ENTERPRISE2: HostId = HostId(7);
    pub const DEFENDER: HostId = HostId(8);
    pub const OP_SERVER0: HostId = HostId(9);
    pub const OP_HOST0: HostId = HostId(10);
    pub const OP_HOST1: HostId = HostId(11);
    pub const OP_HOST2: HostId = HostId(12);

    pub fn new(index: usize) -> Option<HostId> {
        if index < NUM_HOSTS {
            Some(HostId(index as u8))
        } else {
            None
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = HostId> {
        (0..NUM_HOSTS as u8).map(HostId)
    }

    pub fn subnet(self) -> Subnet {
        match self.0 {
            0..=4 => Subnet::User,
            5..=8 => Subnet::Enterprise,
            _ => Subnet::Operational,
        }
    }

    pub fn role(self) -> HostRole {
        match self.0 {
            5..=7 => HostRole::Server,
            9 => HostRole::OperationalServer,
            _ => HostRole::UserHost,
        }
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; NUM_HOSTS] = [
            "User0",
            "User1",
            "User2",
            "User3",
            "User4",
            "Enterprise0",
            "Enterprise1",
            "Enterprise2",
            "Defender",
            "OpServer0",
            "OpHost0",
            "OpHost1",
            "OpHost2",
        ];
        NAMES[self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subnet {
    User,
    Enterprise,
    Operational,
}

impl Subnet {
    pub const ALL: [Subnet; 3] = [Subnet::User, Subnet::Enterprise, Subnet::Operational];

    pub fn hosts(self) -> impl Iterator<Item = HostId> {
        let range = match self {
            Subnet::User => 0u8..5,
            Subnet::Enterprise => 5..9,
            Subnet::Operational => 9..13,
        };
        range.map(HostId)
    }

    /// Linear adjacency: User <-> Enterprise <-> Operational.
    pub fn adjacent(self, other: Subnet) -> bool {
        let idx = |s: Subnet| match s {
            Subnet::User => 0i8,
            Subnet::Enterprise => 1,
            Subnet::Operational => 2,
        };
        (idx(self) - idx(other)).abs() <= 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Subnet::User => "UserNet",
            Subnet::Enterprise => "EnterpriseNet",
            Subnet::Operational => "OperationalNet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostRole {
    UserHost,
    Server,
    OperationalServer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AccessLevel {
    None,
    User,
    Admin,
}

/// Small set of hosts backed by a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HostSet(u16);

impl HostSet {
    pub const EMPTY: HostSet = HostSet(0);

    pub fn insert(&mut self, h: HostId) {
        self.0 |= 1 << h.index();
    }

    pub fn remove(&mut self, h: HostId) {
        self.0 &= !(1 << h.index());
    }

    pub fn contains(self, h: HostId) -> bool {
        self.0 & (1 << h.index()) != 0
    }

    pub fn contains_all(self, other: HostSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: HostSet) -> HostSet {
        HostSet(self.0 | other.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = HostId> {
        HostId::all().filter(move |h| self.contains(*h))
    }

    pub fn of_subnet(subnet: Subnet) -> HostSet {
        let mut s = HostSet::EMPTY;
        for h in subnet.hosts() {
            s.insert(h);
        }
        s
    }
}

impl FromIterator<HostId> for HostSet {
    fn from_iter<I: IntoIterator<Item = HostId>>(iter: I) -> Self {
        let mut s = HostSet::EMPTY;
        for h in iter {
            s.insert(h);
        }
        s
    }
}

/// Ground-truth per-host state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostTrueState {
    pub id: HostId,
    pub subnet: Subnet,
    pub role: HostRole,
    pub red_access: AccessLevel,
    pub known_to_red: bool,
    pub services_scanned_by_red: bool,
    pub decoy_active: bool,
}

/// Defender action, a flat space of 54 discrete choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlueAction {
    Sleep,
    Monitor,
    Analyse(HostId),
    Remove(HostId),
    Restore(HostId),
    Decoy(HostId),
}

impl BlueAction {
    pub fn to_index(self) -> usize {
        match self {
            BlueAction::Sleep => 0,
            BlueAction::Monitor => 1,
            BlueAction::Analyse(h) => 2 + h.index(),
            BlueAction::Remove(h) => 2 + NUM_HOSTS + h.index(),
            BlueAction::Restore(h) => 2 + 2 * NUM_HOSTS + h.index(),
            BlueAction::Decoy(h) => 2 + 3 * NUM_HOSTS + h.index(),
        }
    }

    pub fn from_index(index: usize) -> Result<BlueAction, SimError> {
        let host = |i: usize| HostId(i as u8);
        match index {
            0 => Ok(BlueAction::Sleep),
            1 => Ok(BlueAction::Monitor),
            i if i < 2 + NUM_HOSTS => Ok(BlueAction::Analyse(host(i - 2))),
            i if i < 2 + 2 * NUM_HOSTS => Ok(BlueAction::Remove(host(i - 2 - NUM_HOSTS))),
            i if i < 2 + 3 * NUM_HOSTS => Ok(BlueAction::Restore(host(i - 2 - 2 * NUM_HOSTS))),
            i if i < NUM_BLUE_ACTIONS => Ok(BlueAction::Decoy(host(i - 2 - 3 * NUM_HOSTS))),
            i => Err(SimError::InvalidActionIndex {
                index: i,
                limit: NUM_BLUE_ACTIONS,
            }),
        }
    }
}

impl core::fmt::Display for BlueAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BlueAction::Sleep => write!(f, "Sleep"),
            BlueAction::Monitor => write!(f, "Monitor"),
            BlueAction::Analyse(h) => write!(f, "Analyse({})", h.name()),
            BlueAction::Remove(h) => write!(f, "Remove({})", h.name()),
            BlueAction::Restore(h) => write!(f, "Restore({})", h.name()),
            BlueAction::Decoy(h) => write!(f, "Decoy({})", h.name()),
        }
    }
}

/// Attacker action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedAction {
    Sleep,
    DiscoverHosts(Subnet),
    ScanServices(HostId),
    Exploit(HostId),
    Escalate(HostId),
    Impact,
}

impl core::fmt::Display for RedAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RedAction::Sleep => write!(f, "Sleep"),
            RedAction::DiscoverHosts(s) => write!(f, "DiscoverHosts({})", s.name()),
            RedAction::ScanServices(h) => write!(f, "ScanServices({})", h.name()),
            RedAction::Exploit(h) => write!(f, "Exploit({})", h.name()),
            RedAction::Escalate(h) => write!(f, "Escalate({})", h.name()),
            RedAction::Impact => write!(f, "Impact"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedOutcome {
    Succeeded,
    Failed,
    AbsorbedByDecoy,
    Slept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlueOutcome {
    Succeeded,
    Failed,
    NoOp,
}

/// Per-step resolution summary handed back to both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvents {
    pub red_outcome: RedOutcome,
    pub blue_outcome: BlueOutcome,
    pub reward: f64,
    pub impact_occurred: bool,
    pub restore_used: bool,
}

/// Simulation parameters; all stochastic outcomes are configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub p_exploit_success: f64,
    pub p_restore_fail: f64,
    pub p_detect_exploit: f64,
    pub p_detect_scan: f64,
    pub horizon: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            p_exploit_success: 0.9,
            p_restore_fail: 0.1,
            p_detect_exploit: 0.95,
            p_detect_scan: 1.0,
            horizon: 100,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            self.p_exploit_success,
            self.p_restore_fail,
            self.p_detect_exploit,
            self.p_detect_scan,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p) || !p.is_finite()) {
            return Err(SimError::InvalidConfig("probabilities must lie in [0,1]"));
        }
        if self.horizon == 0 {
            return Err(SimError::InvalidConfig("horizon must be positive"));
        }
        Ok(())
    }
}

/// What the defender saw happen on a host during the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detection {
    #[default]
    None,
    Scan,
    Exploit,
}

/// Defender-side persistent compromise assessment for one host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompromiseMark {
    #[default]
    None,
    Unknown,
    User,
    Privileged,
}

/// The defender's 52-bit view: 4 bits per host in canonical order.
///
/// Per host, bits `[0..2)` encode activity (00 none, 01 scan detected,
/// 10 exploit detected; 11 is never emitted) and bits `[2..4)` encode
/// compromise (00 none, 01 unknown, 10 user, 11 privileged).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    bits: [u8; OBS_BITS],
}

impl Observation {
    pub fn zeros() -> Observation {
        Observation {
            bits: [0; OBS_BITS],
        }
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn len(&self) -> usize {
        OBS_BITS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Activity pair (value 0..=2) for a host.
    pub fn activity(&self, h: HostId) -> u8 {
        let b = 4 * h.index();
        self.bits[b] << 1 | self.bits[b + 1]
    }

    /// Compromise pair (value 0..=3) for a host.
    pub fn compromise(&self, h: HostId) -> u8 {
        let b = 4 * h.index();
        self.bits[b + 2] << 1 | self.bits[b + 3]
    }

    pub fn set_nibble(&mut self, h: HostId, activity: u8, compromise: u8) {
        debug_assert!(activity <= 2 && compromise <= 3);
        let b = 4 * h.index();
        self.bits[b] = activity >> 1;
        self.bits[b + 1] = activity & 1;
        self.bits[b + 2] = compromise >> 1;
        self.bits[b + 3] = compromise & 1;
    }

    /// Bitwise OR, used for the controller's episode fingerprint.
    pub fn or_with(&mut self, other: &Observation) {
        for i in 0..OBS_BITS {
            self.bits[i] |= other.bits[i];
        }
    }

    pub fn to_features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }

    /// Compact textual form, one char per bit.
    pub fn to_bit_string(&self) -> alloc::string::String {
        self.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }
}

/// Full ground-truth simulation state plus the defender's persistent
/// observation memory. All randomness comes from the embedded generator.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub hosts: [HostTrueState; NUM_HOSTS],
    pub step: u32,
    pub config: SimConfig,
    rng: ChaCha8Rng,
    blue_marks: [CompromiseMark; NUM_HOSTS],
    pending_detections: [Detection; NUM_HOSTS],
}

/// Build the canonical 13-host network with red's User0 foothold.
pub fn build_network(config: SimConfig) -> Result<NetworkState, SimError> {
    config.validate()?;
    let hosts = core::array::from_fn(|i| {
        let id = HostId(i as u8);
        HostTrueState {
            id,
            subnet: id.subnet(),
            role: id.role(),
            red_access: if id == HostId::USER0 {
                AccessLevel::User
            } else {
                AccessLevel::None
            },
            known_to_red: id == HostId::USER0,
            services_scanned_by_red: false,
            decoy_active: false,
        }
    });
    Ok(NetworkState {
        hosts,
        step: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        config,
        blue_marks: [CompromiseMark::None; NUM_HOSTS],
        pending_detections: [Detection::None; NUM_HOSTS],
    })
}

/// Hosts red can currently target: same subnet as, or adjacent to, a
/// subnet where red holds at least user access.
pub fn reachable_targets(state: &NetworkState) -> HostSet {
    let mut presence = [false; 3];
    for host in &state.hosts {
        if host.red_access >= AccessLevel::User {
            presence[subnet_index(host.subnet)] = true;
        }
    }
    HostId::all()
        .filter(|h| {
            Subnet::ALL
                .iter()
                .any(|s| presence[subnet_index(*s)] && s.adjacent(h.subnet()))
        })
        .collect()
}

fn subnet_index(s: Subnet) -> usize {
    match s {
        Subnet::User => 0,
        Subnet::Enterprise => 1,
        Subnet::Operational => 2,
    }
}

/// Reward for the resolved step: -0.1 per user-class host under red
/// admin, -1 per (operational) server under red admin, -10 for an
/// impact, -1 for a restore attempt.
pub fn compute_reward(state_after: &NetworkState, events: &StepEvents) -> f64 {
    let mut reward = 0.0;
    for host in &state_after.hosts {
        if host.red_access == AccessLevel::Admin {
            reward -= match host.role {
                HostRole::UserHost => 0.1,
                HostRole::Server | HostRole::OperationalServer => 1.0,
            };
        }
    }
    if events.impact_occurred {
        reward -= 10.0;
    }
    if events.restore_used {
        reward -= 1.0;
    }
    reward
}

/// Encode the defender's observation from this step's detections and
/// the persistent compromise marks.
pub fn encode_observation(
    marks: &[CompromiseMark; NUM_HOSTS],
    detections: &[Detection; NUM_HOSTS],
) -> Observation {
    let mut obs = Observation::zeros();
    for h in HostId::all() {
        let activity = match detections[h.index()] {
            Detection::None => 0,
            Detection::Scan => 1,
            Detection::Exploit => 2,
        };
        let compromise = match marks[h.index()] {
            CompromiseMark::None => 0,
            CompromiseMark::Unknown => 1,
            CompromiseMark::User => 2,
            CompromiseMark::Privileged => 3,
        };
        obs.set_nibble(h, activity, compromise);
    }
    obs
}

impl NetworkState {
    pub fn host(&self, h: HostId) -> &HostTrueState {
        &self.hosts[h.index()]
    }

    pub fn host_mut(&mut self, h: HostId) -> &mut HostTrueState {
        &mut self.hosts[h.index()]
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.horizon
    }

    /// Resolve one turn: red first, then blue, then reward, then the
    /// defender's observation.
    pub fn step(
        &mut self,
        blue: BlueAction,
        red: RedAction,
    ) -> Result<(Observation, StepEvents), SimError> {
        if self.is_done() {
            return Err(SimError::EpisodeComplete {
                step: self.step,
                horizon: self.config.horizon,
            });
        }
        self.pending_detections = [Detection::None; NUM_HOSTS];

        let red_outcome = self.resolve_red(red);
        let impact_occurred =
            red == RedAction::Impact && red_outcome == RedOutcome::Succeeded;

        let (blue_outcome, restore_used, analysed) = self.resolve_blue(blue);

        // Detected exploits mark a host as "unknown" compromise until it
        // is analysed or cleaned.
        for h in HostId::all() {
            if self.pending_detections[h.index()] == Detection::Exploit
                && Some(h) != analysed
                && self.blue_marks[h.index()] == CompromiseMark::None
            {
                self.blue_marks[h.index()] = CompromiseMark::Unknown;
            }
        }

        let mut events = StepEvents {
            red_outcome,
            blue_outcome,
            reward: 0.0,
            impact_occurred,
            restore_used,
        };
        events.reward = compute_reward(self, &events);
        self.step += 1;
        let obs = encode_observation(&self.blue_marks, &self.pending_detections);
        Ok((obs, events))
    }

    fn resolve_red(&mut self, red: RedAction) -> RedOutcome {
        let reachable = reachable_targets(self);
        match red {
            RedAction::Sleep => RedOutcome::Slept,
            RedAction::DiscoverHosts(subnet) => {
                if subnet.hosts().any(|h| reachable.contains(h)) {
                    for h in subnet.hosts() {
                        self.host_mut(h).known_to_red = true;
                    }
                    RedOutcome::Succeeded
                } else {
                    RedOutcome::Failed
                }
            }
            RedAction::ScanServices(h) => {
                if !reachable.contains(h) {
                    return RedOutcome::Failed;
                }
                self.host_mut(h).services_scanned_by_red = true;
                self.host_mut(h).known_to_red = true;
                let p = self.config.p_detect_scan;
                if self.rng.random_bool(p) {
                    self.pending_detections[h.index()] = Detection::Scan;
                }
                RedOutcome::Succeeded
            }
            RedAction::Exploit(h) => {
                if !reachable.contains(h) {
                    return RedOutcome::Failed;
                }
                if self.host(h).decoy_active {
                    // Decoys absorb the exploit and always raise an alert.
                    self.pending_detections[h.index()] = Detection::Exploit;
                    return RedOutcome::AbsorbedByDecoy;
                }
                let p_success = self.config.p_exploit_success;
                if self.rng.random_bool(p_success) {
                    let host = self.host_mut(h);
                    if host.red_access == AccessLevel::None {
                        host.red_access = AccessLevel::User;
                    }
                    let p_detect = self.config.p_detect_exploit;
                    if self.rng.random_bool(p_detect) {
                        self.pending_detections[h.index()] = Detection::Exploit;
                    }
                    RedOutcome::Succeeded
                } else {
                    RedOutcome::Failed
                }
            }
            RedAction::Escalate(h) => match self.host(h).red_access {
                AccessLevel::None => RedOutcome::Failed,
                AccessLevel::User => {
                    self.host_mut(h).red_access = AccessLevel::Admin;
                    RedOutcome::Succeeded
                }
                AccessLevel::Admin => RedOutcome::Succeeded,
            },
            RedAction::Impact => {
                if self.host(HostId::OP_SERVER0).red_access == AccessLevel::Admin {
                    RedOutcome::Succeeded
                } else {
                    RedOutcome::Failed
                }
            }
        }
    }

    fn resolve_blue(&mut self, blue: BlueAction) -> (BlueOutcome, bool, Option<HostId>) {
        match blue {
            BlueAction::Sleep | BlueAction::Monitor => (BlueOutcome::NoOp, false, None),
            BlueAction::Analyse(h) => {
                self.blue_marks[h.index()] = match self.host(h).red_access {
                    AccessLevel::None => CompromiseMark::None,
                    AccessLevel::User => CompromiseMark::User,
                    AccessLevel::Admin => CompromiseMark::Privileged,
                };
                (BlueOutcome::Succeeded, false, Some(h))
            }
            BlueAction::Remove(h) => {
                // Remove only clears user-level access; admin survives and
                // the foothold can never be fully cleaned.
                if self.host(h).red_access == AccessLevel::User && h != HostId::USER0 {
                    self.host_mut(h).red_access = AccessLevel::None;
                    self.blue_marks[h.index()] = CompromiseMark::None;
                    (BlueOutcome::Succeeded, false, None)
                } else {
                    (BlueOutcome::Failed, false, None)
                }
            }
            BlueAction::Restore(h) => {
                let p_fail = self.config.p_restore_fail;
                if self.rng.random_bool(p_fail) {
                    (BlueOutcome::Failed, true, None)
                } else {
                    let host = self.host_mut(h);
                    host.red_access = if h == HostId::USER0 {
                        AccessLevel::User
                    } else {
                        AccessLevel::None
                    };
                    host.decoy_active = false;
                    self.blue_marks[h.index()] = CompromiseMark::None;
                    (BlueOutcome::Succeeded, true, None)
                }
            }
            BlueAction::Decoy(h) => {
                self.host_mut(h).decoy_active = true;
                (BlueOutcome::Succeeded, false, None)
            }
        }
    }
}
