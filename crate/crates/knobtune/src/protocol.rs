//! Client/server wire protocol.
//!
//! The workload runs on the client (the target device) and only actuates
//! knobs and reports measurements; all sampling logic lives on the server,
//! so the controller adds no load where the workload runs. Messages are
//! line-delimited JSON objects over a stream transport. A session follows
//! the ladder:
//!
//! ```text
//! Hello (SetKnob Report){N} Chosen (Monitor | NewPhase (SetKnob Report){N} Chosen)* Bye
//! ```
//!
//! An in-process message pump is provided alongside TCP so simulations run
//! without sockets; both satisfy the same trace grammar.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::controller::{
    ControllerConfig, ControllerEvent, EventKind, PhaseDetector, MonitorOutcome, Workload,
};
use crate::error::{Error, Result};
use crate::knobspace::{KnobSetting, KnobSpace};
use crate::sampler::SamplerState;
use crate::spec::OptimizationSpec;

/// Everything that can cross the wire. Field names are part of the wire
/// contract; do not rename.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    Hello {
        spec: OptimizationSpec,
        space: KnobSpace,
    },
    SetKnob {
        knob: KnobSetting,
        round: usize,
    },
    Report {
        o: f64,
        c: Vec<f64>,
        round: usize,
    },
    Chosen {
        knob: KnobSetting,
        o_ref: f64,
        c_ref: Vec<f64>,
    },
    Monitor {
        o: f64,
        c: Vec<f64>,
        interval: u64,
    },
    NewPhase,
    Bye {
        reason: String,
    },
}

impl WireMessage {
    pub fn kind_name(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "hello",
            WireMessage::SetKnob { .. } => "set_knob",
            WireMessage::Report { .. } => "report",
            WireMessage::Chosen { .. } => "chosen",
            WireMessage::Monitor { .. } => "monitor",
            WireMessage::NewPhase => "new_phase",
            WireMessage::Bye { .. } => "bye",
        }
    }
}

/// Encodes a message as one JSON line (no trailing newline).
pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages always serialize")
}

/// Parses one line. Unknown kinds, missing fields, or malformed JSON yield a
/// protocol error naming the problem; they never panic.
pub fn decode(line: &str) -> Result<WireMessage> {
    serde_json::from_str(line.trim_end_matches(['\r', '\n']))
        .map_err(|e| Error::Protocol(format!("bad message: {e}")))
}

/// Protocol phase of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    AwaitHello,
    /// Awaiting the Report for this 1-based round.
    Sampling(usize),
    Monitoring,
    Closed,
}

/// One entry of a session's message trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// True for messages received, false for messages sent.
    pub inbound: bool,
    pub msg: WireMessage,
}

/// Validates a message-kind sequence against the session grammar. In strict
/// mode Bye is legal only from monitoring (a completed session); relaxed
/// mode also accepts the early Bye that tears down truncated or failed
/// sessions.
pub fn validate_trace(msgs: &[WireMessage], n: usize, strict: bool) -> Result<()> {
    #[derive(Debug, PartialEq)]
    enum S {
        Hello,
        SetKnob(usize),
        Report(usize),
        Chosen,
        Monitoring,
        End,
    }
    let mut s = S::Hello;
    for (i, m) in msgs.iter().enumerate() {
        let fail = |state: &S| {
            Err(Error::Protocol(format!(
                "trace violates grammar at message {i} ({}) in state {state:?}",
                m.kind_name()
            )))
        };
        s = match (&s, m) {
            (S::Hello, WireMessage::Hello { .. }) => S::SetKnob(1),
            (S::SetKnob(r), WireMessage::SetKnob { round, .. }) if round == r => S::Report(*r),
            (S::Report(r), WireMessage::Report { round, .. }) if round == r => {
                if *r < n {
                    S::SetKnob(r + 1)
                } else {
                    S::Chosen
                }
            }
            (S::Chosen, WireMessage::Chosen { .. }) => S::Monitoring,
            (S::Monitoring, WireMessage::Monitor { .. }) => S::Monitoring,
            (S::Monitoring, WireMessage::NewPhase) => S::SetKnob(1),
            (S::Monitoring, WireMessage::Bye { .. }) => S::End,
            (state, WireMessage::Bye { .. }) if !strict && *state != S::End => S::End,
            (state, _) => return fail(state),
        };
    }
    if s != S::End {
        return Err(Error::Protocol(format!(
            "trace ended in non-final state {s:?}"
        )));
    }
    Ok(())
}

/// Server side of one session: owns the sampler, the phase detector, and the
/// event log. Fully self-contained, so any number of sessions can run
/// concurrently without shared state.
#[derive(Debug)]
pub struct ServerSession {
    config: ControllerConfig,
    state: SessionState,
    sampler: Option<SamplerState>,
    detector: Option<PhaseDetector>,
    pending_knob: Option<KnobSetting>,
    phase_index: u32,
    /// Measurement intervals the client has consumed so far.
    interval: u64,
    last_monitor_interval: Option<u64>,
    events: Vec<ControllerEvent>,
    trace: Vec<TraceEntry>,
}

impl ServerSession {
    pub fn new(config: ControllerConfig) -> Self {
        Self {
            config,
            state: SessionState::AwaitHello,
            sampler: None,
            detector: None,
            pending_knob: None,
            phase_index: 0,
            interval: 0,
            last_monitor_interval: None,
            events: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn events(&self) -> &[ControllerEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<ControllerEvent> {
        self.events
    }

    /// Messages processed and sent, in order.
    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Decodes and handles one line; encode errors as a Bye line.
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        match decode(line) {
            Ok(msg) => self.step(&msg).iter().map(encode).collect(),
            Err(e) => {
                let bye = self.teardown(format!("{e}"));
                vec![encode(&bye)]
            }
        }
    }

    /// Advances the session state machine by one received message and
    /// returns the replies to send. Illegal transitions tear the session
    /// down with a Bye carrying a diagnostic.
    pub fn step(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        // Crossing tolerance: a Monitor sent before the client saw our
        // NewPhase may arrive while we are already sampling again. It is a
        // transport artifact, not a protocol violation; drop it without
        // recording it as processed.
        if matches!(self.state, SessionState::Sampling(_))
            && matches!(msg, WireMessage::Monitor { .. })
        {
            return Vec::new();
        }
        if self.state == SessionState::Closed {
            return Vec::new();
        }
        self.trace.push(TraceEntry {
            inbound: true,
            msg: msg.clone(),
        });
        let replies = match self.dispatch(msg) {
            Ok(replies) => replies,
            Err(e) => vec![self.teardown(format!("{e}"))],
        };
        for r in &replies {
            self.trace.push(TraceEntry {
                inbound: false,
                msg: r.clone(),
            });
        }
        replies
    }

    fn dispatch(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>> {
        match (self.state, msg) {
            (SessionState::AwaitHello, WireMessage::Hello { spec, space }) => {
                self.on_hello(spec, space)
            }
            (SessionState::Sampling(round), WireMessage::Report { o, c, round: r }) => {
                if *r != round {
                    return Err(Error::Protocol(format!(
                        "expected report for round {round}, got {r}"
                    )));
                }
                self.on_report(*o, c)
            }
            (SessionState::Monitoring, WireMessage::Monitor { o, c, interval }) => {
                self.on_monitor(*o, c, *interval)
            }
            (_, WireMessage::Bye { reason }) => {
                self.finish(reason);
                Ok(Vec::new())
            }
            (state, m) => Err(Error::Protocol(format!(
                "unexpected {} in state {state:?}",
                m.kind_name()
            ))),
        }
    }

    fn on_hello(&mut self, spec: &OptimizationSpec, space: &KnobSpace) -> Result<Vec<WireMessage>> {
        spec.validate()?;
        space.validate()?;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::PhaseStarted {
                phase_index: self.phase_index,
            },
        });
        let sampler = SamplerState::new(
            self.config.schedule,
            space.clone(),
            spec.clone(),
            self.config.seed,
            self.config.warm_start.clone(),
        )?;
        self.sampler = Some(sampler);
        self.issue_next_knob()
    }

    fn issue_next_knob(&mut self) -> Result<Vec<WireMessage>> {
        let sampler = self.sampler.as_mut().expect("sampler exists");
        let round = sampler.next_round();
        let knob = sampler.next_sample()?;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::SampleRequested {
                round,
                knob: knob.clone(),
            },
        });
        self.pending_knob = Some(knob.clone());
        self.state = SessionState::Sampling(round);
        Ok(vec![WireMessage::SetKnob { knob, round }])
    }

    fn on_report(&mut self, o: f64, c: &[f64]) -> Result<Vec<WireMessage>> {
        let knob = self
            .pending_knob
            .take()
            .ok_or_else(|| Error::Protocol("report without an outstanding knob".into()))?;
        let sampler = self.sampler.as_mut().expect("sampling state has a sampler");
        let round = sampler.next_round();
        sampler.record(knob.clone(), o, c.to_vec())?;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::SampleMeasured {
                round,
                knob,
                o,
                c: c.to_vec(),
            },
        });
        self.interval += 1;
        if !sampler.is_complete() {
            return self.issue_next_knob();
        }
        let choice = sampler.select_best()?;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::KnobChosen {
                knob: choice.knob.clone(),
                o_ref: choice.objective,
                c_ref: choice.constraints.clone(),
                feasible: choice.feasible,
            },
        });
        self.detector = Some(PhaseDetector::from_choice(&choice, self.config.detector)?);
        self.state = SessionState::Monitoring;
        Ok(vec![WireMessage::Chosen {
            knob: choice.knob,
            o_ref: choice.objective,
            c_ref: choice.constraints,
        }])
    }

    fn on_monitor(&mut self, o: f64, c: &[f64], interval: u64) -> Result<Vec<WireMessage>> {
        if let Some(last) = self.last_monitor_interval {
            if interval <= last {
                return Err(Error::Protocol(format!(
                    "monitor interval {interval} not increasing (last {last})"
                )));
            }
        }
        self.last_monitor_interval = Some(interval);
        self.events.push(ControllerEvent {
            interval,
            kind: EventKind::MonitorTick { o, c: c.to_vec() },
        });
        self.interval = interval + 1;
        let detector = self.detector.as_mut().expect("monitoring state has a detector");
        if detector.monitor_step(o, c) == MonitorOutcome::Stay {
            return Ok(Vec::new());
        }
        self.events.push(ControllerEvent {
            interval,
            kind: EventKind::NewPhaseDetected,
        });
        self.phase_index += 1;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::PhaseStarted {
                phase_index: self.phase_index,
            },
        });
        let sampler = self.sampler.as_ref().expect("session has a sampler");
        // Fresh sampler for the new phase; stale measurements are exactly
        // what the detector just invalidated, so no warm start here.
        let fresh = SamplerState::new(
            self.config.schedule,
            sampler.space().clone(),
            sampler.spec().clone(),
            self.config.seed.wrapping_add(self.phase_index as u64),
            Vec::new(),
        )?;
        self.sampler = Some(fresh);
        self.last_monitor_interval = None;
        let mut replies = vec![WireMessage::NewPhase];
        replies.extend(self.issue_next_knob()?);
        Ok(replies)
    }

    /// Graceful end of session (client said Bye). A session that ends
    /// mid-sampling still commits the best knob seen so far.
    fn finish(&mut self, _reason: &str) {
        if let SessionState::Sampling(_) = self.state {
            if let Some(sampler) = &self.sampler {
                if !sampler.history().is_empty() {
                    if let Ok(choice) = sampler.select_best() {
                        self.events.push(ControllerEvent {
                            interval: self.interval,
                            kind: EventKind::KnobChosen {
                                knob: choice.knob,
                                o_ref: choice.objective,
                                c_ref: choice.constraints,
                                feasible: choice.feasible,
                            },
                        });
                    }
                }
            }
        }
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::Finished,
        });
        self.state = SessionState::Closed;
    }

    fn teardown(&mut self, reason: String) -> WireMessage {
        self.state = SessionState::Closed;
        self.events.push(ControllerEvent {
            interval: self.interval,
            kind: EventKind::Finished,
        });
        let bye = WireMessage::Bye { reason };
        self.trace.push(TraceEntry {
            inbound: false,
            msg: bye.clone(),
        });
        bye
    }
}

/// Client-side protocol phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientState {
    Start,
    /// Sampling: awaiting SetKnob or Chosen.
    AwaitKnob,
    Monitoring,
    Done,
}

/// Client side of one session, wrapping a workload. The client only
/// actuates knobs and measures intervals; it makes no tuning decisions.
#[derive(Debug)]
pub struct ClientSession<W: Workload> {
    workload: W,
    state: ClientState,
    /// Intervals consumed so far; the global counter reported in Monitor.
    interval: u64,
    trace: Vec<TraceEntry>,
}

impl<W: Workload> ClientSession<W> {
    pub fn new(workload: W) -> Self {
        Self {
            workload,
            state: ClientState::Start,
            interval: 0,
            trace: Vec::new(),
        }
    }

    pub fn state(&self) -> ClientState {
        self.state
    }

    pub fn workload(&self) -> &W {
        &self.workload
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.state == ClientState::Done
    }

    /// Opens the session: announces the optimization problem and knob space.
    pub fn start(&mut self) -> WireMessage {
        assert_eq!(self.state, ClientState::Start, "start() called twice");
        self.state = ClientState::AwaitKnob;
        let hello = WireMessage::Hello {
            spec: self.workload.spec().clone(),
            space: self.workload.space().clone(),
        };
        self.trace.push(TraceEntry {
            inbound: false,
            msg: hello.clone(),
        });
        hello
    }

    /// Handles one server message, returning any messages to send back.
    pub fn on_message(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        self.trace.push(TraceEntry {
            inbound: true,
            msg: msg.clone(),
        });
        let replies = match (self.state, msg) {
            (ClientState::AwaitKnob, WireMessage::SetKnob { knob, round }) => {
                self.apply_and_report(knob, *round)
            }
            (ClientState::AwaitKnob, WireMessage::Chosen { knob, .. }) => {
                if !self.workload.space().contains(knob) {
                    self.bye(format!("chosen knob {knob} out of range"))
                } else if self.workload.set_knob(knob).is_err() {
                    self.bye("failed to apply chosen knob".into())
                } else {
                    self.state = ClientState::Monitoring;
                    Vec::new()
                }
            }
            (ClientState::Monitoring, WireMessage::NewPhase) => {
                // The next SetKnob restarts sampling.
                self.state = ClientState::AwaitKnob;
                Vec::new()
            }
            // A SetKnob may follow NewPhase in the same flush.
            (_, WireMessage::Bye { .. }) => {
                self.state = ClientState::Done;
                Vec::new()
            }
            (state, m) => self.bye(format!("unexpected {} in client state {state:?}", m.kind_name())),
        };
        for r in &replies {
            self.trace.push(TraceEntry {
                inbound: false,
                msg: r.clone(),
            });
        }
        replies
    }

    fn apply_and_report(&mut self, knob: &KnobSetting, round: usize) -> Vec<WireMessage> {
        if !self.workload.space().contains(knob) {
            return self.bye(format!("knob {knob} out of range"));
        }
        if self.workload.set_knob(knob).is_err() {
            return self.bye("failed to apply knob".into());
        }
        match self.workload.measure_interval() {
            Ok(Some((o, c))) => {
                self.interval += 1;
                vec![WireMessage::Report { o, c, round }]
            }
            Ok(None) => self.bye("workload complete".into()),
            Err(e) => self.bye(format!("measurement failed: {e}")),
        }
    }

    /// One monitoring interval: measure and report, or close out when the
    /// workload ends. Returns None outside monitoring mode.
    pub fn tick(&mut self) -> Option<WireMessage> {
        if self.state != ClientState::Monitoring {
            return None;
        }
        let msg = match self.workload.measure_interval() {
            Ok(Some((o, c))) => {
                let interval = self.interval;
                self.interval += 1;
                WireMessage::Monitor { o, c, interval }
            }
            Ok(None) => {
                self.state = ClientState::Done;
                WireMessage::Bye {
                    reason: "workload complete".into(),
                }
            }
            Err(e) => {
                self.state = ClientState::Done;
                WireMessage::Bye {
                    reason: format!("measurement failed: {e}"),
                }
            }
        };
        self.trace.push(TraceEntry {
            inbound: false,
            msg: msg.clone(),
        });
        Some(msg)
    }

    fn bye(&mut self, reason: String) -> Vec<WireMessage> {
        self.state = ClientState::Done;
        vec![WireMessage::Bye { reason }]
    }
}

/// Runs a client and a server session to completion over an in-process
/// message pump (single-threaded, lockstep, fully deterministic). Returns
/// when the client is done or both sides go quiet.
pub fn run_in_process<W: Workload>(
    client: &mut ClientSession<W>,
    server: &mut ServerSession,
) -> Result<()> {
    let mut to_server = std::collections::VecDeque::new();
    to_server.push_back(client.start());
    loop {
        while let Some(m) = to_server.pop_front() {
            for reply in server.step(&m) {
                for back in client.on_message(&reply) {
                    to_server.push_back(back);
                }
            }
        }
        if client.is_done() || server.state() == SessionState::Closed {
            break;
        }
        match client.tick() {
            Some(m) => to_server.push_back(m),
            None => break,
        }
    }
    // Flush a trailing Bye if the client queued one after the server closed.
    while let Some(m) = to_server.pop_front() {
        server.step(&m);
    }
    Ok(())
}

/// Wall-clock read timeout while the client awaits a sampling reply,
/// expressed in measurement intervals.
const REPLY_TIMEOUT_INTERVALS: u32 = 10;
/// Poll window for NewPhase while monitoring. Localhost round trips are
/// microseconds; 50 ms gives three orders of magnitude slack.
const MONITOR_POLL: Duration = Duration::from_millis(50);

fn send_line(stream: &mut TcpStream, msg: &WireMessage) -> Result<()> {
    let mut line = encode(msg);
    line.push('\n');
    stream
        .write_all(line.as_bytes())
        .map_err(|e| Error::Session(format!("send failed: {e}")))
}

/// Reads one line, returning Ok(None) on timeout.
fn read_line_opt(reader: &mut BufReader<TcpStream>) -> Result<Option<String>> {
    let mut line = String::new();
    match reader.read_line(&mut line) {
        Ok(0) => Err(Error::Session("peer closed the connection".into())),
        Ok(_) => Ok(Some(line)),
        Err(e)
            if e.kind() == std::io::ErrorKind::WouldBlock
                || e.kind() == std::io::ErrorKind::TimedOut =>
        {
            Ok(None)
        }
        Err(e) => Err(Error::Session(format!("read failed: {e}"))),
    }
}

/// Serves sessions, one thread per connection, calling `on_finish` with each
/// completed session. With `max_sessions` set, stops accepting after that
/// many connections and joins them before returning (handy for tests).
pub fn serve(
    listener: TcpListener,
    config: ControllerConfig,
    max_sessions: Option<usize>,
    on_finish: impl Fn(ServerSession) + Send + Sync + 'static,
) -> Result<()> {
    let on_finish = std::sync::Arc::new(on_finish);
    let mut served = 0;
    let mut handles = Vec::new();
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::Session(format!("accept failed: {e}")))?;
        let config = config.clone();
        let on_finish = on_finish.clone();
        handles.push(std::thread::spawn(move || {
            match handle_connection(stream, config) {
                Ok(session) => on_finish(session),
                Err(e) => eprintln!("session failed: {e}"),
            }
        }));
        served += 1;
        if let Some(max) = max_sessions {
            if served >= max {
                break;
            }
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

/// Runs one server session over a TCP stream to completion.
pub fn handle_connection(stream: TcpStream, config: ControllerConfig) -> Result<ServerSession> {
    stream
        .set_nodelay(true)
        .map_err(|e| Error::Session(format!("{e}")))?;
    // The server's patience: ten nominal 3-second intervals.
    let timeout = Duration::from_secs(3 * REPLY_TIMEOUT_INTERVALS as u64);
    stream
        .set_read_timeout(Some(timeout))
        .map_err(|e| Error::Session(format!("{e}")))?;
    let mut writer = stream
        .try_clone()
        .map_err(|e| Error::Session(format!("{e}")))?;
    let mut reader = BufReader::new(stream);
    let mut session = ServerSession::new(config);
    loop {
        let line = match read_line_opt(&mut reader) {
            Ok(Some(line)) => line,
            Ok(None) => {
                // Peer silent for ten intervals: give up.
                let bye = WireMessage::Bye {
                    reason: "timeout waiting for client".into(),
                };
                let _ = send_line(&mut writer, &bye);
                session.step(&bye);
                break;
            }
            Err(_) => break, // connection gone; keep the partial log
        };
        for reply in session.handle_line(&line) {
            writer
                .write_all(reply.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
                .map_err(|e| Error::Session(format!("send failed: {e}")))?;
        }
        if session.state() == SessionState::Closed {
            break;
        }
    }
    Ok(session)
}

/// Drives a workload-backed client session against a remote server over
/// TCP. Returns the finished client session (trace included).
pub fn run_client_tcp<W: Workload>(
    addr: &str,
    workload: W,
    interval_seconds: f64,
) -> Result<ClientSession<W>> {
    let stream =
        TcpStream::connect(addr).map_err(|e| Error::Session(format!("connect failed: {e}")))?;
    stream
        .set_nodelay(true)
        .map_err(|e| Error::Session(format!("{e}")))?;
    let mut writer = stream
        .try_clone()
        .map_err(|e| Error::Session(format!("{e}")))?;
    let reply_timeout =
        Duration::from_secs_f64((interval_seconds * REPLY_TIMEOUT_INTERVALS as f64).max(1.0));
    let mut reader = BufReader::new(stream);
    let mut client = ClientSession::new(workload);
    send_line(&mut writer, &client.start())?;

    loop {
        match client.state() {
            ClientState::Done => break,
            ClientState::Monitoring => {
                // Send one monitoring report, then give the server a short
                // window to flag a phase change before the next interval.
                let Some(msg) = client.tick() else { break };
                send_line(&mut writer, &msg)?;
                if client.is_done() {
                    break;
                }
                reader
                    .get_ref()
                    .set_read_timeout(Some(MONITOR_POLL))
                    .map_err(|e| Error::Session(format!("{e}")))?;
                while let Some(line) = read_line_opt(&mut reader)? {
                    for reply in handle_client_line(&mut client, &line) {
                        send_line(&mut writer, &reply)?;
                    }
                    if client.state() != ClientState::Monitoring {
                        break;
                    }
                }
            }
            _ => {
                // Awaiting a sampling-phase reply: block up to the timeout.
                reader
                    .get_ref()
                    .set_read_timeout(Some(reply_timeout))
                    .map_err(|e| Error::Session(format!("{e}")))?;
                match read_line_opt(&mut reader)? {
                    Some(line) => {
                        for reply in handle_client_line(&mut client, &line) {
                            send_line(&mut writer, &reply)?;
                        }
                    }
                    None => {
                        send_line(
                            &mut writer,
                            &WireMessage::Bye {
                                reason: "timeout waiting for server".into(),
                            },
                        )?;
                        break;
                    }
                }
            }
        }
    }
    Ok(client)
}

fn handle_client_line<W: Workload>(
    client: &mut ClientSession<W>,
    line: &str,
) -> Vec<WireMessage> {
    match decode(line) {
        Ok(msg) => client.on_message(&msg),
        Err(e) => {
            client.state = ClientState::Done;
            vec![WireMessage::Bye {
                reason: format!("{e}"),
            }]
        }
    }
}
