//! The pub/sub control-message model: typed events exchanged between
//! simulated consumers, the aggregator and the orchestrator, collected
//! into an append-only, totally ordered trace.
//!
//! The trace serializes one record per line as self-describing JSON with
//! `seq`, `tick` and `kind` fields; see [`TraceEntry`].

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{AggregatorState, QosClass, QueueId, LINK_CAPACITY, QUEUE_COUNT};
use crate::orchestrator::TerminalReason;

#[derive(Debug, Error, PartialEq)]
pub enum PubSubError {
    #[error("topic {topic:?} carries QoS {expected:?}, subscription asked for {requested:?}")]
    QosMismatch {
        topic: QueueId,
        expected: QosClass,
        requested: QosClass,
    },
    #[error("bandwidth notification rejected: rates sum to {sum}, above the link capacity")]
    ConstraintViolation { sum: f64 },
}

/// A control message between consumers, the aggregator and the orchestrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub timestamp: u64,
    pub payload: MessagePayload,
}

/// The four message kinds of the pub/sub exchange: a consumer subscribes,
/// the aggregator reports metadata, the orchestrator grants bandwidth, the
/// aggregator publishes data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessagePayload {
    Subscribe {
        topic: QueueId,
        qos: QosClass,
    },
    Metadata {
        subscriber_counts: [u32; QUEUE_COUNT],
        qos_levels: [QosClass; QUEUE_COUNT],
        occupancies: [f64; QUEUE_COUNT],
    },
    BandwidthNotify {
        rates: [f64; QUEUE_COUNT],
    },
    Publish {
        topic: QueueId,
        /// Delivered volume in buffer percent-points.
        volume: f64,
    },
}

/// Raised by the aggregator when a queue breaches the occupancy threshold;
/// the trigger for an allocation episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub queue: QueueId,
    pub occupancy: f64,
    pub threshold: f64,
}

/// One line of the run trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

/// Everything that can appear in a run trace: the four message kinds,
/// alarms, and the episode/step markers written by the experiment runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Subscribe {
        topic: QueueId,
        qos: QosClass,
    },
    Metadata {
        subscriber_counts: [u32; QUEUE_COUNT],
        qos_levels: [QosClass; QUEUE_COUNT],
        occupancies: [f64; QUEUE_COUNT],
    },
    BandwidthNotify {
        rates: [f64; QUEUE_COUNT],
    },
    Publish {
        topic: QueueId,
        volume: f64,
    },
    Alarm {
        queue: QueueId,
        occupancy: f64,
        threshold: f64,
    },
    EpisodeStart {
        episode: u32,
        state_index: usize,
    },
    Step {
        episode: u32,
        step: u32,
        state_index: usize,
        action_index: usize,
        reward: f64,
        rates: [f64; QUEUE_COUNT],
    },
    EpisodeEnd {
        episode: u32,
        steps: u32,
        terminal: TerminalReason,
    },
}

impl From<MessagePayload> for TraceEvent {
    fn from(payload: MessagePayload) -> Self {
        match payload {
            MessagePayload::Subscribe { topic, qos } => TraceEvent::Subscribe { topic, qos },
            MessagePayload::Metadata {
                subscriber_counts,
                qos_levels,
                occupancies,
            } => TraceEvent::Metadata {
                subscriber_counts,
                qos_levels,
                occupancies,
            },
            MessagePayload::BandwidthNotify { rates } => TraceEvent::BandwidthNotify { rates },
            MessagePayload::Publish { topic, volume } => TraceEvent::Publish { topic, volume },
        }
    }
}

impl From<&AlarmEvent> for TraceEvent {
    fn from(alarm: &AlarmEvent) -> Self {
        TraceEvent::Alarm {
            queue: alarm.queue,
            occupancy: alarm.occupancy,
            threshold: alarm.threshold,
        }
    }
}

/// In-process message exchange: validates messages, counts subscribers and
/// appends every event to the trace in (tick, emission order).
#[derive(Debug, Default)]
pub struct MessageBus {
    subscriber_counts: [u32; QUEUE_COUNT],
    entries: Vec<TraceEntry>,
    last_tick: u64,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscriber_counts(&self) -> [u32; QUEUE_COUNT] {
        self.subscriber_counts
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub(crate) fn record(&mut self, tick: u64, event: TraceEvent) {
        assert!(tick >= self.last_tick, "trace ticks must not go backwards");
        self.last_tick = tick;
        self.entries.push(TraceEntry {
            seq: self.entries.len() as u64,
            tick,
            event,
        });
    }

    /// A consumer subscribes to a topic at the requested QoS level. The QoS
    /// must match the topic's fixed class.
    pub fn subscribe(
        &mut self,
        tick: u64,
        topic: QueueId,
        qos: QosClass,
    ) -> Result<Message, PubSubError> {
        let expected = topic.qos_class();
        if qos != expected {
            return Err(PubSubError::QosMismatch {
                topic,
                expected,
                requested: qos,
            });
        }
        self.subscriber_counts[topic.slot()] += 1;
        let message = Message {
            timestamp: tick,
            payload: MessagePayload::Subscribe { topic, qos },
        };
        self.record(tick, message.payload.clone().into());
        Ok(message)
    }

    /// The aggregator reports subscriber counts, QoS levels and buffer
    /// occupancies to the orchestrator.
    pub fn send_metadata(&mut self, tick: u64, occupancies: [f64; QUEUE_COUNT]) -> Message {
        let payload = MessagePayload::Metadata {
            subscriber_counts: self.subscriber_counts,
            qos_levels: [
                QueueId::B1.qos_class(),
                QueueId::B2.qos_class(),
                QueueId::B3.qos_class(),
            ],
            occupancies,
        };
        let message = Message {
            timestamp: tick,
            payload,
        };
        self.record(tick, message.payload.clone().into());
        message
    }

    /// One alarm per queue whose occupancy is above the threshold; empty
    /// when nothing breached. Alarms trigger allocation episodes.
    pub fn emit_alarm(
        &mut self,
        tick: u64,
        state: &AggregatorState,
        threshold: f64,
    ) -> Vec<AlarmEvent> {
        let mut alarms = Vec::new();
        for queue in QueueId::ALL {
            let occupancy = state.occupancy[queue.slot()];
            if occupancy > threshold {
                let alarm = AlarmEvent {
                    queue,
                    occupancy,
                    threshold,
                };
                self.record(tick, (&alarm).into());
                alarms.push(alarm);
            }
        }
        alarms
    }

    /// The orchestrator grants per-QoS bandwidth. Rejected outright if the
    /// rates exceed the link capacity, so the trace never carries an
    /// infeasible allocation.
    pub fn notify_bandwidth(
        &mut self,
        tick: u64,
        rates: [f64; QUEUE_COUNT],
    ) -> Result<Message, PubSubError> {
        let sum: f64 = rates.iter().sum();
        if sum > LINK_CAPACITY + crate::env::CAPACITY_TOLERANCE {
            return Err(PubSubError::ConstraintViolation { sum });
        }
        let message = Message {
            timestamp: tick,
            payload: MessagePayload::BandwidthNotify { rates },
        };
        self.record(tick, message.payload.clone().into());
        Ok(message)
    }

    /// The aggregator publishes drained data to the topic's consumers.
    pub fn publish(&mut self, tick: u64, topic: QueueId, volume: f64) -> Message {
        let message = Message {
            timestamp: tick,
            payload: MessagePayload::Publish { topic, volume },
        };
        self.record(tick, message.payload.clone().into());
        message
    }

    /// Serialize the trace as line-delimited JSON.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut writer, entry)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parse a line-delimited JSON trace, e.g. one written by
/// [`MessageBus::write_jsonl`].
pub fn read_jsonl<R: BufRead>(reader: R) -> io::Result<Vec<TraceEntry>> {
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}
