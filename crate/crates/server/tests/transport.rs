mod common;

use common::*;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};
use streetsim::env::RobotAction;
use streetsim_server::config::{ClockMode, ServerConfig};
use streetsim_server::protocol::{ErrorCode, Request, Response, Status};
use streetsim_server::transport::Server;
use tungstenite::Message;

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(addr: SocketAddr) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        Self { reader: BufReader::new(s.try_clone().unwrap()), writer: s }
    }

    fn raw(&mut self, line: &str) -> Response {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
        let mut buf = String::new();
        self.reader.read_line(&mut buf).unwrap();
        serde_json::from_str(&buf).unwrap()
    }

    fn send(&mut self, req: &Request) -> Response {
        self.raw(&serde_json::to_string(req).unwrap())
    }
}

fn start(config: ServerConfig, mrs: bool) -> Server {
    let session = if mrs { mrs_session(6, config).0 } else { mmnav_session(3, config).0 };
    Server::bind(session).unwrap()
}

#[test]
fn two_clients_start_actions_in_the_same_buffer_tick() {
    let server = start(fast_config(), true);
    let addr = server.tcp_addr;
    server.spawn();
    let mut a = Client::connect(addr);
    let mut b = Client::connect(addr);
    assert_eq!(a.send(&Request::new("reset").agent(0)).status, Status::Ok);
    assert_eq!(b.send(&Request::new("reset").agent(1)).status, Status::Ok);
    let ta = std::thread::spawn(move || {
        let r = a.send(&Request::new("step").agent(0).action(RobotAction::TurnRight));
        (a, r)
    });
    // b takes its time; a's action must not start without it
    std::thread::sleep(Duration::from_millis(100));
    let rb = b.send(&Request::new("step").agent(1).action(RobotAction::TurnLeft));
    let (_a, ra) = ta.join().unwrap();
    let (oa, ob) = (ra.outcome.unwrap(), rb.outcome.unwrap());
    assert_eq!(oa.outcome.started_tick, ob.outcome.started_tick);
    assert_eq!(oa.tick, ob.tick);
}

#[test]
fn malformed_line_keeps_the_connection() {
    let server = start(fast_config(), false);
    let addr = server.tcp_addr;
    server.spawn();
    let mut c = Client::connect(addr);
    let r = c.raw("{{{ nope");
    assert_eq!(r.status, Status::Error);
    assert_eq!(r.code(), Some(ErrorCode::Malformed));
    let r = c.raw("{\"op\":\"step\",\"agent\":0,\"action\":\"move_forward\",\"id\":\"x\"}");
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.id, Some(serde_json::json!("x")));
    assert!(r.outcome.is_some());
}

#[test]
fn bind_conflict_is_reported() {
    let first = start(fast_config(), false);
    let cfg = ServerConfig { port: first.tcp_addr.port(), ..fast_config() };
    let (session, _) = mmnav_session(3, cfg);
    assert!(Server::bind(session).is_err());
}

#[test]
fn websocket_uses_the_same_messages() {
    let cfg = ServerConfig { ws_port: Some(0), ..fast_config() };
    let server = start(cfg, false);
    let ws = server.ws_addr.unwrap();
    server.spawn();
    let (mut socket, _) = tungstenite::connect(format!("ws://{ws}/")).unwrap();
    let mut call = |line: String| -> Response {
        socket.send(Message::Text(line)).unwrap();
        loop {
            match socket.read().unwrap() {
                Message::Text(t) => return serde_json::from_str(&t).unwrap(),
                _ => continue,
            }
        }
    };
    let r = call(serde_json::to_string(&Request::new("reset").agent(0)).unwrap());
    assert!(r.observation.unwrap().instruction.is_some());
    let r = call("garbage".into());
    assert_eq!(r.code(), Some(ErrorCode::Malformed));
    let r = call(serde_json::to_string(&Request::new("step").agent(0).action(RobotAction::TurnLeft)).unwrap());
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.outcome.unwrap().outcome.duration, 1.0);
}

#[test]
fn real_time_mode_paces_by_wall_clock() {
    let cfg = ServerConfig { mode: ClockMode::RealTime, ..fast_config() };
    let server = start(cfg, false);
    let addr = server.tcp_addr;
    server.spawn();
    let mut c = Client::connect(addr);
    c.send(&Request::new("reset").agent(0));
    let t0 = Instant::now();
    let r = c.send(&Request::new("step").agent(0).action(RobotAction::Stay));
    let wall = t0.elapsed().as_secs_f64();
    assert_eq!(r.status, Status::Ok);
    // a half-second action takes about half a second
    assert!(wall >= 0.45, "{wall}");
    assert!(wall < 5.0, "{wall}");
    // the world keeps moving while nobody acts
    let before = c.send(&Request::new("info")).info.unwrap()["polls"].as_u64().unwrap();
    std::thread::sleep(Duration::from_millis(200));
    let after = c.send(&Request::new("info")).info.unwrap()["polls"].as_u64().unwrap();
    assert!(after > before);
}
