//! In-process publish/subscribe fabric.
//!
//! Topics are typed on first advertise (or first publish). Each subscription
//! owns a bounded queue with keep-last history; a full best-effort queue drops
//! its oldest entry, a full reliable queue rejects the new entry and the
//! publisher gets [`BusError::QueueFull`]. Publishing never waits on a
//! consumer.
//!
//! Defaults for topics whose QoS is not otherwise pinned (feedback, recorder
//! inputs): [`QosProfile::default`] = depth 8, best effort.

mod topic;

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::Duration;

use thiserror::Error;

use crate::clock::SharedClock;
use crate::messages::{
    BridgeHealth, ButtonEvent, GripperCommand, ImageFrame, PlannerStatus, PoseSample,
    RecorderControl, RecorderStatus, RobotState, SessionEvent, TargetPose,
};

pub use topic::TopicName;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("invalid topic name: {0}")]
    InvalidTopic(String),
    #[error("topic {topic} carries {registered:?}, not {offered:?}")]
    TypeMismatch { topic: String, registered: PayloadKind, offered: PayloadKind },
    #[error("topic {0} already has an exclusive subscriber")]
    ExclusiveConflict(String),
    #[error("reliable subscriber queue full on {topic} ({dropped} subscriber(s) missed the message)")]
    QueueFull { topic: String, dropped: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reliability {
    BestEffort,
    Reliable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QosProfile {
    depth: usize,
    reliability: Reliability,
}

impl QosProfile {
    /// Depth is raised to at least one.
    pub fn new(depth: usize, reliability: Reliability) -> Self {
        Self { depth: depth.max(1), reliability }
    }

    pub fn best_effort(depth: usize) -> Self {
        Self::new(depth, Reliability::BestEffort)
    }

    pub fn reliable(depth: usize) -> Self {
        Self::new(depth, Reliability::Reliable)
    }

    /// Control-topic profile: depth 1, best effort.
    pub fn keep_last_one() -> Self {
        Self::best_effort(1)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn reliability(&self) -> Reliability {
        self.reliability
    }
}

impl Default for QosProfile {
    fn default() -> Self {
        Self::best_effort(8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    Pose,
    Button,
    Session,
    Target,
    Gripper,
    RobotState,
    Frame,
    Health,
    PlannerStatus,
    RecorderControl,
    RecorderStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Pose(PoseSample),
    Button(ButtonEvent),
    Session(SessionEvent),
    Target(TargetPose),
    Gripper(GripperCommand),
    RobotState(RobotState),
    Frame(ImageFrame),
    Health(BridgeHealth),
    PlannerStatus(PlannerStatus),
    RecorderControl(RecorderControl),
    RecorderStatus(RecorderStatus),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Pose(_) => PayloadKind::Pose,
            Payload::Button(_) => PayloadKind::Button,
            Payload::Session(_) => PayloadKind::Session,
            Payload::Target(_) => PayloadKind::Target,
            Payload::Gripper(_) => PayloadKind::Gripper,
            Payload::RobotState(_) => PayloadKind::RobotState,
            Payload::Frame(_) => PayloadKind::Frame,
            Payload::Health(_) => PayloadKind::Health,
            Payload::PlannerStatus(_) => PayloadKind::PlannerStatus,
            Payload::RecorderControl(_) => PayloadKind::RecorderControl,
            Payload::RecorderStatus(_) => PayloadKind::RecorderStatus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: TopicName,
    /// Bus clock at publish, nanoseconds.
    pub publish_time: u64,
    /// Per-topic sequence, starting at 1.
    pub sequence: u64,
    /// Bus-wide publish order, used to merge several subscriptions.
    pub order: u64,
    pub payload: Payload,
}

struct SubQueue {
    qos: QosProfile,
    exclusive: bool,
    buf: Mutex<VecDeque<Envelope>>,
    ready: Condvar,
    evicted: AtomicU64,
}

struct TopicState {
    kind: PayloadKind,
    next_seq: u64,
    latest: Option<Envelope>,
    subs: Vec<Weak<SubQueue>>,
}

impl TopicState {
    fn new(kind: PayloadKind) -> Self {
        Self { kind, next_seq: 1, latest: None, subs: Vec::new() }
    }
}

struct BusInner {
    clock: SharedClock,
    topics: Mutex<HashMap<TopicName, TopicSlot>>,
    order: AtomicU64,
}

// A topic may be subscribed before anyone advertises it, so the kind is optional.
struct TopicSlot {
    state: Option<TopicState>,
    pending_subs: Vec<Weak<SubQueue>>,
}

/// Cheaply cloneable handle to one bus.
#[derive(Clone)]
pub struct Bus {
    inner: Arc<BusInner>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus").finish_non_exhaustive()
    }
}

impl Bus {
    pub fn new(clock: SharedClock) -> Self {
        Self {
            inner: Arc::new(BusInner {
                clock,
                topics: Mutex::new(HashMap::new()),
                order: AtomicU64::new(0),
            }),
        }
    }

    pub fn clock(&self) -> &SharedClock {
        &self.inner.clock
    }

    pub fn now_ns(&self) -> u64 {
        self.inner.clock.now_ns()
    }

    /// Registers the payload kind of a topic. Re-advertising with the same kind is a no-op.
    pub fn advertise(&self, topic: &TopicName, kind: PayloadKind) -> Result<(), BusError> {
        let mut topics = self.inner.topics.lock().unwrap();
        let slot = topics
            .entry(topic.clone())
            .or_insert_with(|| TopicSlot { state: None, pending_subs: Vec::new() });
        match &slot.state {
            Some(state) if state.kind != kind => Err(BusError::TypeMismatch {
                topic: topic.full(),
                registered: state.kind,
                offered: kind,
            }),
            Some(_) => Ok(()),
            None => {
                let mut state = TopicState::new(kind);
                state.subs = std::mem::take(&mut slot.pending_subs);
                slot.state = Some(state);
                Ok(())
            }
        }
    }

    /// Publishes to every live subscription of `topic` and returns the sequence number.
    pub fn publish(&self, topic: &TopicName, payload: Payload) -> Result<u64, BusError> {
        let kind = payload.kind();
        self.advertise(topic, kind)?;
        let now = self.inner.clock.now_ns();
        let mut topics = self.inner.topics.lock().unwrap();
        let state = topics
            .get_mut(topic)
            .and_then(|s| s.state.as_mut())
            .expect("advertised above");
        let envelope = Envelope {
            topic: topic.clone(),
            publish_time: now,
            sequence: state.next_seq,
            order: self.inner.order.fetch_add(1, Ordering::Relaxed),
            payload,
        };
        state.next_seq += 1;

        let mut rejected = 0;
        state.subs.retain(|weak| {
            let Some(sub) = weak.upgrade() else { return false };
            let mut buf = sub.buf.lock().unwrap();
            if buf.len() >= sub.qos.depth {
                match sub.qos.reliability {
                    Reliability::BestEffort => {
                        buf.pop_front();
                        sub.evicted.fetch_add(1, Ordering::Relaxed);
                    }
                    Reliability::Reliable => {
                        rejected += 1;
                        return true;
                    }
                }
            }
            buf.push_back(envelope.clone());
            sub.ready.notify_all();
            true
        });
        let seq = envelope.sequence;
        state.latest = Some(envelope);
        if rejected > 0 {
            return Err(BusError::QueueFull { topic: topic.full(), dropped: rejected });
        }
        Ok(seq)
    }

    pub fn subscribe(&self, topic: &TopicName, qos: QosProfile) -> Result<Subscription, BusError> {
        self.subscribe_inner(topic, qos, false)
    }

    /// Like [`Bus::subscribe`], but fails if another exclusive subscription is alive.
    pub fn subscribe_exclusive(
        &self,
        topic: &TopicName,
        qos: QosProfile,
    ) -> Result<Subscription, BusError> {
        self.subscribe_inner(topic, qos, true)
    }

    fn subscribe_inner(
        &self,
        topic: &TopicName,
        qos: QosProfile,
        exclusive: bool,
    ) -> Result<Subscription, BusError> {
        let mut topics = self.inner.topics.lock().unwrap();
        let slot = topics
            .entry(topic.clone())
            .or_insert_with(|| TopicSlot { state: None, pending_subs: Vec::new() });
        let list = match slot.state.as_mut() {
            Some(state) => &mut state.subs,
            None => &mut slot.pending_subs,
        };
        list.retain(|w| w.strong_count() > 0);
        if exclusive && list.iter().filter_map(Weak::upgrade).any(|s| s.exclusive) {
            return Err(BusError::ExclusiveConflict(topic.full()));
        }
        let queue = Arc::new(SubQueue {
            qos,
            exclusive,
            buf: Mutex::new(VecDeque::with_capacity(qos.depth.min(1024))),
            ready: Condvar::new(),
            evicted: AtomicU64::new(0),
        });
        list.push(Arc::downgrade(&queue));
        Ok(Subscription { topic: topic.clone(), queue })
    }

    /// Most recent envelope on `topic`, without consuming anything.
    pub fn latest(&self, topic: &TopicName) -> Option<Envelope> {
        let topics = self.inner.topics.lock().unwrap();
        topics.get(topic)?.state.as_ref()?.latest.clone()
    }

    /// Number of envelopes ever published on `topic`.
    pub fn published_count(&self, topic: &TopicName) -> u64 {
        let topics = self.inner.topics.lock().unwrap();
        topics
            .get(topic)
            .and_then(|s| s.state.as_ref())
            .map_or(0, |s| s.next_seq - 1)
    }

    pub fn topic_names(&self) -> Vec<TopicName> {
        let topics = self.inner.topics.lock().unwrap();
        let mut names: Vec<_> =
            topics.iter().filter(|(_, s)| s.state.is_some()).map(|(t, _)| t.clone()).collect();
        names.sort();
        names
    }
}

/// Consumer side of one subscription. Dropping it unsubscribes.
pub struct Subscription {
    topic: TopicName,
    queue: Arc<SubQueue>,
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription").field("topic", &self.topic).finish_non_exhaustive()
    }
}

impl Subscription {
    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    pub fn qos(&self) -> QosProfile {
        self.queue.qos
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.queue.buf.lock().unwrap().pop_front()
    }

    /// Blocks up to `timeout` (real time) for the next envelope.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Envelope> {
        let buf = self.queue.buf.lock().unwrap();
        let (mut buf, _) = self
            .queue
            .ready
            .wait_timeout_while(buf, timeout, |b| b.is_empty())
            .unwrap();
        buf.pop_front()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        self.queue.buf.lock().unwrap().drain(..).collect()
    }

    /// Newest pending envelope; older pending ones are discarded.
    pub fn take_latest(&self) -> Option<Envelope> {
        let mut buf = self.queue.buf.lock().unwrap();
        let last = buf.pop_back();
        buf.clear();
        last
    }

    pub fn len(&self) -> usize {
        self.queue.buf.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.queue.buf.lock().unwrap().clear();
    }

    /// Envelopes dropped by keep-last eviction so far.
    pub fn evicted(&self) -> u64 {
        self.queue.evicted.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::messages::{Button, ButtonEvent, GripperCommand};
    use proptest::prelude::*;

    fn bus() -> (Bus, VirtualClock) {
        let clock = VirtualClock::new(0);
        (Bus::new(Arc::new(clock.clone())), clock)
    }

    fn grip(closed: bool, stamp: u64) -> Payload {
        Payload::Gripper(GripperCommand { closed, stamp_ns: stamp })
    }

    fn t(s: &str) -> TopicName {
        TopicName::parse(s).unwrap()
    }

    #[test]
    fn publish_then_drain() {
        let (bus, clock) = bus();
        let topic = t("phone2act/gripper_cmd");
        let sub = bus.subscribe(&topic, QosProfile::default()).unwrap();
        clock.advance(42);
        bus.publish(&topic, grip(true, 1)).unwrap();
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].payload, grip(true, 1));
        assert_eq!(got[0].publish_time, 42);
        assert_eq!(got[0].sequence, 1);
    }

    #[test]
    fn keep_last_depth_one_keeps_newest() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        let sub = bus.subscribe(&topic, QosProfile::keep_last_one()).unwrap();
        for i in 1..=5 {
            bus.publish(&topic, grip(i % 2 == 0, i)).unwrap();
        }
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].sequence, 5);
        assert_eq!(sub.evicted(), 4);
    }

    #[test]
    fn two_depths_hold_different_histories() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        let a = bus.subscribe(&topic, QosProfile::best_effort(1)).unwrap();
        let b = bus.subscribe(&topic, QosProfile::best_effort(16)).unwrap();
        for i in 0..10 {
            bus.publish(&topic, grip(false, i)).unwrap();
        }
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 10);
    }

    #[test]
    fn namespaces_are_isolated() {
        let (bus, _) = bus();
        let right = bus.subscribe(&t("/right/phone2act/target_pose"), QosProfile::default()).unwrap();
        bus.publish(&t("/left/phone2act/target_pose"), grip(true, 0)).unwrap();
        assert!(right.is_empty());
    }

    #[test]
    fn never_published_topic_polls_empty() {
        let (bus, _) = bus();
        let sub = bus.subscribe(&t("nothing/here"), QosProfile::default()).unwrap();
        assert!(sub.try_recv().is_none());
        assert!(bus.latest(&t("nothing/here")).is_none());
    }

    #[test]
    fn subscribe_before_advertise_still_receives() {
        let (bus, _) = bus();
        let topic = t("/left/phone2act/button");
        let sub = bus.subscribe(&topic, QosProfile::default()).unwrap();
        bus.publish(&topic, Payload::Button(ButtonEvent { button: Button::VolumeUp, stamp_ms: 0.0 }))
            .unwrap();
        assert_eq!(sub.len(), 1);
    }

    #[test]
    fn latest_is_a_snapshot() {
        let (bus, _) = bus();
        let a = t("a/x");
        let b = t("b/x");
        assert!(bus.latest(&a).is_none());
        bus.publish(&a, grip(false, 1)).unwrap();
        bus.publish(&a, grip(true, 2)).unwrap();
        assert_eq!(bus.latest(&a).unwrap().payload, grip(true, 2));
        assert_eq!(bus.latest(&a).unwrap().payload, grip(true, 2));
        bus.publish(&b, grip(false, 3)).unwrap();
        assert_eq!(bus.latest(&a).unwrap().sequence, 2);
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        bus.publish(&topic, grip(true, 0)).unwrap();
        let err = bus
            .publish(&topic, Payload::Button(ButtonEvent { button: Button::VolumeUp, stamp_ms: 0.0 }))
            .unwrap_err();
        assert!(matches!(err, BusError::TypeMismatch { .. }));
    }

    #[test]
    fn exclusive_subscription_conflicts() {
        let (bus, _) = bus();
        let topic = t("phone2act/target_pose");
        let first = bus.subscribe_exclusive(&topic, QosProfile::keep_last_one()).unwrap();
        let _shared = bus.subscribe(&topic, QosProfile::default()).unwrap();
        assert!(matches!(
            bus.subscribe_exclusive(&topic, QosProfile::keep_last_one()),
            Err(BusError::ExclusiveConflict(_))
        ));
        drop(first);
        bus.subscribe_exclusive(&topic, QosProfile::keep_last_one()).unwrap();
    }

    #[test]
    fn reliable_overflow_errors_without_eviction() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        let sub = bus.subscribe(&topic, QosProfile::reliable(2)).unwrap();
        bus.publish(&topic, grip(true, 1)).unwrap();
        bus.publish(&topic, grip(true, 2)).unwrap();
        assert!(matches!(bus.publish(&topic, grip(true, 3)), Err(BusError::QueueFull { .. })));
        let seqs: Vec<_> = sub.drain().iter().map(|e| e.sequence).collect();
        assert_eq!(seqs, vec![1, 2]);
    }

    #[test]
    fn stalled_consumer_does_not_block_publisher() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        let _stalled = bus.subscribe(&topic, QosProfile::best_effort(4)).unwrap();
        let start = std::time::Instant::now();
        for i in 0..100_000 {
            bus.publish(&topic, grip(false, i)).unwrap();
        }
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn recv_timeout_wakes_on_publish() {
        let (bus, _) = bus();
        let topic = t("phone2act/gripper_cmd");
        let sub = bus.subscribe(&topic, QosProfile::default()).unwrap();
        let b2 = bus.clone();
        let tp = topic.clone();
        let h = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(20));
            b2.publish(&tp, grip(true, 9)).unwrap();
        });
        let got = sub.recv_timeout(Duration::from_secs(5));
        h.join().unwrap();
        assert_eq!(got.unwrap().payload, grip(true, 9));
    }

    fn segment() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,6}"
    }

    proptest! {
        #[test]
        fn fifo_and_depth_bound(depth in 1usize..20, n in 0usize..60, drain_every in 1usize..10) {
            let (bus, _) = bus();
            let topic = t("p/q");
            let sub = bus.subscribe(&topic, QosProfile::best_effort(depth)).unwrap();
            let mut last = 0;
            for i in 0..n {
                bus.publish(&topic, grip(false, i as u64)).unwrap();
                prop_assert!(sub.len() <= depth);
                if i % drain_every == 0 {
                    for e in sub.drain() {
                        prop_assert!(e.sequence > last);
                        last = e.sequence;
                    }
                }
            }
        }

        #[test]
        fn namespace_isolation_fuzz(ns_a in segment(), ns_b in segment(), g in segment(), name in segment()) {
            prop_assume!(ns_a != ns_b);
            let (bus, _) = bus();
            let base = format!("{g}/{name}");
            let ta = TopicName::new(&format!("/{ns_a}"), &base).unwrap();
            let tb = TopicName::new(&format!("/{ns_b}"), &base).unwrap();
            let sub_b = bus.subscribe(&tb, QosProfile::default()).unwrap();
            let sub_a = bus.subscribe(&ta, QosProfile::default()).unwrap();
            bus.publish(&ta, grip(true, 0)).unwrap();
            prop_assert!(sub_b.is_empty());
            prop_assert_eq!(sub_a.len(), 1);
        }
    }
}
