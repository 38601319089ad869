//! The single owner of the authoritative scene, the engine clock and every
//! client's latest pose. All mutations and tick computations run here in
//! message order, so a tick never sees half of a scene swap.

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use aurastage_core::mix::{membership, membership_events, Zone};
use aurastage_core::{compute_mix, ListenerPose, Scene, Vec2};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{Instant, MissedTickBehavior};

use crate::protocol::{ClientMessage, ServerMessage};

pub type ClientId = u64;

#[derive(Debug)]
pub enum Command {
    Connect {
        id: ClientId,
        tx: mpsc::UnboundedSender<ServerMessage>,
    },
    Disconnect {
        id: ClientId,
    },
    Message {
        id: ClientId,
        msg: ClientMessage,
    },
    Snapshot {
        reply: oneshot::Sender<Snapshot>,
    },
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub scene: Scene,
    pub version: u64,
    pub clients: usize,
    pub t: f64,
}

struct Client {
    tx: mpsc::UnboundedSender<ServerMessage>,
    pose: Option<(Vec2, f64)>,
    zones: BTreeSet<Zone>,
}

pub struct Engine {
    scene: Scene,
    version: u64,
    epoch: Instant,
    clients: HashMap<ClientId, Client>,
}

impl Engine {
    pub fn new(scene: Scene) -> Self {
        Self {
            scene,
            version: 1,
            epoch: Instant::now(),
            clients: HashMap::new(),
        }
    }

    fn now(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64()
    }

    fn scene_message(&self) -> ServerMessage {
        ServerMessage::Scene {
            version: self.version,
            scene: self.scene.clone(),
        }
    }

    fn swap_scene(&mut self, scene: Scene) {
        self.scene = scene;
        self.version += 1;
        let msg = self.scene_message();
        for c in self.clients.values() {
            let _ = c.tx.send(msg.clone());
        }
    }

    fn reply(&self, id: ClientId, msg: ServerMessage) {
        if let Some(c) = self.clients.get(&id) {
            let _ = c.tx.send(msg);
        }
    }

    pub fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Connect { id, tx } => {
                let _ = tx.send(self.scene_message());
                self.clients.insert(
                    id,
                    Client {
                        tx,
                        pose: None,
                        zones: BTreeSet::new(),
                    },
                );
            }
            Command::Disconnect { id } => {
                self.clients.remove(&id);
            }
            Command::Snapshot { reply } => {
                let _ = reply.send(Snapshot {
                    scene: self.scene.clone(),
                    version: self.version,
                    clients: self.clients.len(),
                    t: self.now(),
                });
            }
            Command::Message { id, msg } => self.handle_message(id, msg),
        }
    }

    fn handle_message(&mut self, id: ClientId, msg: ClientMessage) {
        match msg {
            ClientMessage::Pose { x, y, heading_deg } => {
                if !(x.is_finite() && y.is_finite() && heading_deg.is_finite()) {
                    self.reply(
                        id,
                        ServerMessage::protocol_error("pose values must be finite"),
                    );
                } else if let Some(c) = self.clients.get_mut(&id) {
                    c.pose = Some((Vec2::new(x, y), heading_deg));
                }
            }
            ClientMessage::EditSource(edit) => match self.scene.with_edit(&edit) {
                Ok(next) => self.swap_scene(next),
                Err(e) => self.reply(id, ServerMessage::validation_error(e.to_string())),
            },
            ClientMessage::LoadScene { scene } => match scene.validate() {
                Ok(()) => self.swap_scene(scene),
                Err(e) => self.reply(id, ServerMessage::validation_error(e.to_string())),
            },
            ClientMessage::ResetClock {} => self.epoch = Instant::now(),
        }
    }

    /// Pushes a mix, and any zone changes, to every client with a pose.
    pub fn tick(&mut self) {
        let t = self.now();
        for c in self.clients.values_mut() {
            let Some((pos, heading)) = c.pose else {
                continue;
            };
            let pose = ListenerPose::new(pos, heading, t);
            let _ = c.tx.send(ServerMessage::Mix {
                scene_version: self.version,
                mix: compute_mix(&self.scene, &pose, t),
            });
            let zones = membership(&self.scene, &pose);
            let events = membership_events(&c.zones, &zones, t);
            if !events.is_empty() {
                let _ = c.tx.send(ServerMessage::Events { events });
            }
            c.zones = zones;
        }
    }

    pub async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>, period: Duration) {
        let mut ticker = tokio::time::interval(period);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                biased;
                cmd = rx.recv() => match cmd {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                },
                _ = ticker.tick() => self.tick(),
            }
        }
    }
}
