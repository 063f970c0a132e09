use crate::bus::{Bus, Envelope, Payload, QosProfile, Subscription, TopicName};
use crate::messages::topics;

use super::{Planner, PlannerConfig, PlannerEffect, PlannerError};

/// Bus wiring for one [`Planner`] instance under a namespace.
///
/// Each call to [`PlannerNode::spin_once`] drains every input subscription,
/// merges the envelopes in bus publish order and feeds them to the planner.
pub struct PlannerNode {
    planner: Planner,
    bus: Bus,
    pose_sub: Subscription,
    button_sub: Subscription,
    feedback_sub: Subscription,
    session_sub: Subscription,
    target_topic: TopicName,
    gripper_topic: TopicName,
    status_topic: TopicName,
    warnings: Vec<String>,
}

impl PlannerNode {
    pub fn new(bus: &Bus, namespace: &str, config: PlannerConfig) -> Result<Self, PlannerError> {
        let t = |base: &str| TopicName::new(namespace, base);
        let planner = Planner::new(config)?;
        let node = Self {
            planner,
            bus: bus.clone(),
            pose_sub: bus.subscribe(&t(topics::PHONE_POSE)?, QosProfile::best_effort(256))?,
            button_sub: bus.subscribe(&t(topics::BUTTON)?, QosProfile::best_effort(64))?,
            feedback_sub: bus.subscribe(&t(topics::ROBOT_FEEDBACK)?, QosProfile::default())?,
            session_sub: bus.subscribe(&t(topics::SESSION)?, QosProfile::default())?,
            target_topic: t(topics::TARGET_POSE)?,
            gripper_topic: t(topics::GRIPPER_CMD)?,
            status_topic: t(topics::PLANNER_STATUS)?,
            warnings: Vec::new(),
        };
        bus.advertise(&node.target_topic, crate::bus::PayloadKind::Target)?;
        bus.advertise(&node.gripper_topic, crate::bus::PayloadKind::Gripper)?;
        bus.publish(&node.status_topic, Payload::PlannerStatus(node.planner.status()))?;
        Ok(node)
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    /// Warnings raised since construction (e.g. a release before any feedback).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Processes everything pending; returns how many envelopes were consumed.
    pub fn spin_once(&mut self) -> Result<usize, PlannerError> {
        let mut pending: Vec<Envelope> = Vec::new();
        for sub in [&self.pose_sub, &self.button_sub, &self.feedback_sub, &self.session_sub] {
            pending.extend(sub.drain());
        }
        pending.sort_by_key(|e| e.order);
        let n = pending.len();
        for env in pending {
            let now = env.publish_time;
            let effects = match &env.payload {
                Payload::Pose(sample) => self
                    .planner
                    .process_pose(sample, now)
                    .map(|t| vec![PlannerEffect::Target(t)])
                    .unwrap_or_default(),
                Payload::Button(b) => self.planner.handle_button(b, now),
                Payload::RobotState(s) => {
                    self.planner.on_feedback(s);
                    Vec::new()
                }
                Payload::Session(s) => self.planner.on_session(*s),
                _ => Vec::new(),
            };
            self.emit(effects)?;
        }
        Ok(n)
    }

    fn emit(&mut self, effects: Vec<PlannerEffect>) -> Result<(), PlannerError> {
        for effect in effects {
            match effect {
                PlannerEffect::Target(t) => {
                    self.bus.publish(&self.target_topic, Payload::Target(t))?;
                }
                PlannerEffect::Gripper(g) => {
                    self.bus.publish(&self.gripper_topic, Payload::Gripper(g))?;
                }
                PlannerEffect::Status(s) => {
                    self.bus.publish(&self.status_topic, Payload::PlannerStatus(s))?;
                }
                PlannerEffect::Warning(w) => self.warnings.push(w),
            }
        }
        Ok(())
    }
}
