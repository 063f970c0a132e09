use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use teleop_core::bridge::controller::{MockController, MockControllerServer, SharedController};
use teleop_core::bridge::sim::SimArmConfig;
use teleop_core::bridge::{
    run_bridge, BridgeError, BridgeNode, InProcessBridge, RobotBridge, TcpLineBridge, WireCommand,
    WireState,
};
use teleop_core::bus::{Bus, Payload, QosProfile, TopicName};
use teleop_core::clock::{Clock, MonotonicClock, SharedClock, VirtualClock, NANOS_PER_MILLI};
use teleop_core::messages::{topics, GripperCommand, HealthStatus, TargetPose};
use teleop_core::pose_math::{Quat, Vec3};

fn target(x: f64) -> Payload {
    Payload::Target(TargetPose {
        position: Vec3::new(x, 0.0, 0.25),
        orientation: Quat::new(0.0, 1.0, 0.0, 0.0).unwrap(),
        stamp_ns: 0,
    })
}

fn topic(ns: &str, base: &str) -> TopicName {
    TopicName::new(ns, base).unwrap()
}

fn virtual_setup() -> (Arc<VirtualClock>, Bus, SharedController) {
    let vclock = Arc::new(VirtualClock::new(0));
    let clock: SharedClock = vclock.clone();
    let bus = Bus::new(clock.clone());
    let ctrl = MockController::shared(SimArmConfig::default(), clock);
    (vclock, bus, ctrl)
}

fn received_seqs(ctrl: &SharedController) -> Vec<u64> {
    ctrl.lock().unwrap().received_commands().iter().map(|c| c.seq).collect()
}

#[test]
fn stepped_burst_forwards_only_newest() {
    for n in 2..=64u64 {
        let (clock, bus, ctrl) = virtual_setup();
        let mut node = BridgeNode::new(&bus, "", InProcessBridge::new(ctrl.clone()), SimArmConfig::default()).unwrap();
        node.spin_once(0).unwrap();
        let t = topic("", topics::TARGET_POSE);
        let mut last = 0;
        for i in 0..n {
            last = bus.publish(&t, target(0.40 + i as f64 * 1e-4)).unwrap();
        }
        clock.advance(NANOS_PER_MILLI);
        node.spin_once(clock.now_ns()).unwrap();
        assert_eq!(received_seqs(&ctrl), vec![last], "burst of {n}");
    }
}

#[test]
fn feedback_rate_over_one_second() {
    let (clock, bus, ctrl) = virtual_setup();
    let mut node = BridgeNode::new(&bus, "", InProcessBridge::new(ctrl), SimArmConfig::default()).unwrap();
    let fb = bus.subscribe(&topic("", topics::ROBOT_FEEDBACK), QosProfile::best_effort(1024)).unwrap();
    for ms in 0..1000u64 {
        clock.advance_to(ms * NANOS_PER_MILLI);
        node.spin_once(clock.now_ns()).unwrap();
    }
    let n = fb.drain().len();
    assert!((98..=102).contains(&n), "got {n} feedback envelopes");
}

#[test]
fn gripper_reflected_in_next_feedback() {
    let (clock, bus, ctrl) = virtual_setup();
    let mut node = BridgeNode::new(&bus, "/left", InProcessBridge::new(ctrl), SimArmConfig::default()).unwrap();
    let fb = bus.subscribe(&topic("/left", topics::ROBOT_FEEDBACK), QosProfile::best_effort(64)).unwrap();
    node.spin_once(0).unwrap();
    let first = fb.try_recv().unwrap();
    let Payload::RobotState(s) = first.payload else { panic!() };
    assert!(!s.gripper_closed);

    bus.publish(
        &topic("/left", topics::GRIPPER_CMD),
        Payload::Gripper(GripperCommand { closed: true, stamp_ns: 0 }),
    )
    .unwrap();
    let mut ms = 0;
    let next = loop {
        ms += 1;
        clock.advance_to(ms * NANOS_PER_MILLI);
        node.spin_once(clock.now_ns()).unwrap();
        if let Some(e) = fb.try_recv() {
            break e;
        }
    };
    let Payload::RobotState(s) = next.payload else { panic!() };
    assert!(s.gripper_closed);
}

/// InProcessBridge with a kill switch, to simulate a dropped connection.
struct FlakyLink {
    inner: InProcessBridge,
    down: Arc<AtomicBool>,
}

impl FlakyLink {
    fn check(&self) -> Result<(), BridgeError> {
        if self.down.load(Ordering::SeqCst) {
            Err(BridgeError::Io("link down".into()))
        } else {
            Ok(())
        }
    }
}

impl RobotBridge for FlakyLink {
    fn connect(&mut self) -> Result<(), BridgeError> {
        self.check().map_err(|_| BridgeError::Connect("refused".into()))?;
        self.inner.connect()
    }
    fn send_command(&mut self, cmd: &WireCommand) -> Result<(), BridgeError> {
        self.check()?;
        self.inner.send_command(cmd)
    }
    fn read_state(&mut self) -> Result<WireState, BridgeError> {
        self.check()?;
        self.inner.read_state()
    }
    fn send_gripper(&mut self, closed: bool, seq: u64) -> Result<(), BridgeError> {
        self.check()?;
        self.inner.send_gripper(closed, seq)
    }
}

#[test]
fn reconnect_discards_stale_targets_and_reports_health() {
    let (clock, bus, ctrl) = virtual_setup();
    let down = Arc::new(AtomicBool::new(false));
    let link = FlakyLink { inner: InProcessBridge::new(ctrl.clone()), down: down.clone() };
    let mut node = BridgeNode::new(&bus, "", link, SimArmConfig::default()).unwrap();
    let health = bus.subscribe(&topic("", topics::BRIDGE_HEALTH), QosProfile::best_effort(64)).unwrap();
    let t = topic("", topics::TARGET_POSE);

    node.spin_once(0).unwrap();
    let s1 = bus.publish(&t, target(0.41)).unwrap();
    clock.advance_to(NANOS_PER_MILLI);
    node.spin_once(clock.now_ns()).unwrap();
    assert_eq!(received_seqs(&ctrl), vec![s1]);

    down.store(true, Ordering::SeqCst);
    bus.publish(&t, target(0.42)).unwrap();
    clock.advance_to(2 * NANOS_PER_MILLI);
    node.spin_once(clock.now_ns()).unwrap();
    assert!(!node.is_connected());

    // commands published during the outage
    for i in 0..5 {
        bus.publish(&t, target(0.43 + i as f64 * 0.001)).unwrap();
    }
    down.store(false, Ordering::SeqCst);
    let mut ms = 2;
    while !node.is_connected() {
        ms += 1;
        assert!(ms < 5_000, "never reconnected");
        clock.advance_to(ms * NANOS_PER_MILLI);
        node.spin_once(clock.now_ns()).unwrap();
    }
    assert_eq!(received_seqs(&ctrl), vec![s1], "stale target forwarded after reconnect");

    let fresh = bus.publish(&t, target(0.45)).unwrap();
    clock.advance_to((ms + 1) * NANOS_PER_MILLI);
    node.spin_once(clock.now_ns()).unwrap();
    assert_eq!(received_seqs(&ctrl), vec![s1, fresh]);

    let statuses: Vec<HealthStatus> = health
        .drain()
        .into_iter()
        .filter_map(|e| match e.payload {
            Payload::Health(h) => Some(h.status),
            _ => None,
        })
        .collect();
    assert_eq!(statuses.first(), Some(&HealthStatus::Ok));
    assert!(statuses.contains(&HealthStatus::Degraded));
    assert_eq!(statuses.last(), Some(&HealthStatus::Ok));
}

fn wait_for(what: &str, timeout: Duration, mut f: impl FnMut() -> bool) {
    let start = Instant::now();
    while !f() {
        assert!(start.elapsed() < timeout, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(1));
    }
}

#[test]
fn threaded_bridge_stalled_link_sends_newest_only() {
    for n in [2u64, 7, 64] {
        let clock: SharedClock = Arc::new(MonotonicClock::new());
        let bus = Bus::new(clock.clone());
        let ctrl = MockController::shared(SimArmConfig::default(), clock);
        let link = InProcessBridge::new(ctrl.clone());
        let gate = link.stall_gate();
        let handle = run_bridge(&bus, "", link, SimArmConfig::default()).unwrap();
        let t = topic("", topics::TARGET_POSE);
        // targets queued before the link comes up are dropped as stale
        wait_for("connect", Duration::from_secs(5), || handle.latest_state().is_some());

        let s1 = bus.publish(&t, target(0.41)).unwrap();
        wait_for("first command", Duration::from_secs(5), || received_seqs(&ctrl) == vec![s1]);

        gate.set_stalled(true);
        // the feedback poll parks on the gate while holding the link
        wait_for("stall", Duration::from_secs(5), || gate.blocked_writers() > 0);
        let mut last = 0;
        for i in 0..n {
            last = bus.publish(&t, target(0.42 + i as f64 * 1e-4)).unwrap();
        }
        gate.set_stalled(false);
        wait_for("newest", Duration::from_secs(5), || received_seqs(&ctrl).last() == Some(&last));
        std::thread::sleep(Duration::from_millis(30));
        assert_eq!(received_seqs(&ctrl), vec![s1, last], "burst of {n}");
        assert!(handle.latest_state().is_some());
        handle.stop();
    }
}

#[test]
fn tcp_bridge_closes_the_loop() {
    let clock: SharedClock = Arc::new(MonotonicClock::new());
    let bus = Bus::new(clock.clone());
    let ctrl = MockController::shared(SimArmConfig::default(), clock);
    let server = MockControllerServer::start("127.0.0.1:0", ctrl.clone()).unwrap();
    let link = TcpLineBridge::new(server.local_addr().to_string());
    let handle = run_bridge(&bus, "/right", link, SimArmConfig::default()).unwrap();
    wait_for("connect", Duration::from_secs(5), || handle.latest_state().is_some());

    let seq = bus.publish(&topic("/right", topics::TARGET_POSE), target(0.45)).unwrap();
    wait_for("applied command", Duration::from_secs(5), || {
        handle.latest_state().map(|s| s.command_seq) == Some(seq)
    });
    wait_for("motion", Duration::from_secs(5), || {
        handle.latest_state().map(|s| s.ee_position.x > 0.401).unwrap_or(false)
    });
    // nothing leaks into other namespaces
    assert_eq!(bus.published_count(&topic("", topics::ROBOT_FEEDBACK)), 0);
    handle.stop();
    server.stop();
}

#[test]
fn tcp_bridge_recovers_after_server_drops_connections() {
    let clock: SharedClock = Arc::new(MonotonicClock::new());
    let bus = Bus::new(clock.clone());
    let ctrl = MockController::shared(SimArmConfig::default(), clock);
    let server = MockControllerServer::start("127.0.0.1:0", ctrl.clone()).unwrap();
    let link = TcpLineBridge::new(server.local_addr().to_string()).with_timeout(Duration::from_millis(200));
    let handle = run_bridge(&bus, "", link, SimArmConfig::default()).unwrap();
    let health = bus.subscribe(&topic("", topics::BRIDGE_HEALTH), QosProfile::best_effort(64)).unwrap();
    let t = topic("", topics::TARGET_POSE);

    wait_for("feedback", Duration::from_secs(5), || handle.latest_state().is_some());
    server.disconnect_all();
    wait_for("degraded", Duration::from_secs(5), || {
        health.drain().iter().any(|e| matches!(&e.payload, Payload::Health(h) if h.status == HealthStatus::Degraded))
    });
    wait_for("reconnect", Duration::from_secs(5), || {
        health.drain().iter().any(|e| matches!(&e.payload, Payload::Health(h) if h.status == HealthStatus::Ok))
    });
    let seq = bus.publish(&t, target(0.44)).unwrap();
    wait_for("command after reconnect", Duration::from_secs(5), || {
        received_seqs(&ctrl).contains(&seq)
    });
    handle.stop();
    server.stop();
}
