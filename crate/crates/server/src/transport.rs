//! TCP (newline framed) and websocket (one text frame per message) front
//! ends over the same session. Each connection gets its own thread.

use crate::session::Session;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread::JoinHandle;
use tungstenite::Message;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

pub struct Server {
    pub tcp_addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
    tcp: TcpListener,
    ws: Option<TcpListener>,
    session: Arc<Session>,
}

fn bind(addr: String) -> Result<TcpListener, ServeError> {
    TcpListener::bind(&addr).map_err(|source| ServeError::Bind { addr, source })
}

impl Server {
    pub fn bind(session: Arc<Session>) -> Result<Self, ServeError> {
        let cfg = session.config();
        let tcp = bind(format!("{}:{}", cfg.host, cfg.port))?;
        let ws = match cfg.ws_port {
            Some(p) => Some(bind(format!("{}:{}", cfg.host, p))?),
            None => None,
        };
        let tcp_addr = tcp.local_addr().map_err(|source| ServeError::Bind { addr: cfg.host.clone(), source })?;
        let ws_addr = ws.as_ref().and_then(|l| l.local_addr().ok());
        Ok(Self { tcp_addr, ws_addr, tcp, ws, session })
    }

    /// Accept loops run on background threads.
    pub fn spawn(self) -> Vec<JoinHandle<()>> {
        let mut handles = Vec::new();
        if let Some(clock) = self.session.start_clock() {
            handles.push(clock);
        }
        if let Some(ws) = self.ws {
            let session = self.session.clone();
            handles.push(std::thread::spawn(move || accept_loop(ws, session, serve_ws)));
        }
        let session = self.session.clone();
        let tcp = self.tcp;
        handles.push(std::thread::spawn(move || accept_loop(tcp, session, serve_tcp)));
        handles
    }

    pub fn run(self) {
        for h in self.spawn() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, session: Arc<Session>, handler: fn(TcpStream, Arc<Session>)) {
    for stream in listener.incoming() {
        match stream {
            Ok(s) => {
                let session = session.clone();
                std::thread::spawn(move || handler(s, session));
            }
            Err(e) => eprintln!("accept: {e}"),
        }
    }
}

fn serve_tcp(stream: TcpStream, session: Arc<Session>) {
    let conn = session.connect();
    let _ = stream.set_nodelay(true);
    let Ok(read_half) = stream.try_clone() else { return };
    let reader = BufReader::new(read_half);
    let mut writer = stream;
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(conn, &line);
        let mut text = resp.to_line();
        text.push('\n');
        if writer.write_all(text.as_bytes()).and_then(|_| writer.flush()).is_err() {
            break;
        }
    }
    session.disconnect(conn);
}

fn serve_ws(stream: TcpStream, session: Arc<Session>) {
    let _ = stream.set_nodelay(true);
    let Ok(mut socket) = tungstenite::accept(stream) else { return };
    let conn = session.connect();
    loop {
        let text = match socket.read() {
            Ok(Message::Text(t)) => t,
            Ok(Message::Binary(b)) => match String::from_utf8(b) {
                Ok(t) => t,
                Err(_) => break,
            },
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if text.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(conn, &text);
        if socket.send(Message::Text(resp.to_line())).is_err() {
            break;
        }
    }
    session.disconnect(conn);
}
