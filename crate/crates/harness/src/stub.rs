//! Minimal HTTP/1.1 endpoint speaking the remote oracle protocol, answering
//! from annotations. Failures can be scripted to exercise retries and
//! degradation.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use bridgecause_core::vqa::{
    AnnotationOracle, AnswerOracle, OracleError, OracleRequest, OracleResponse, Question,
};

/// Scripted misbehaviour. The default answers every request correctly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubBehaviour {
    /// Reply 503 to this many requests before answering normally.
    pub fail_first: usize,
    /// Reply with an out-of-vocabulary answer to every n-th request
    /// (1-based), after the scripted failures.
    pub garbage_every: Option<usize>,
    /// Sleep before replying.
    pub delay: Option<Duration>,
    /// Confidence attached to every answer.
    pub confidence: Option<f64>,
}

#[derive(Debug, Default)]
struct Counters {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// Running stub server; shuts down when dropped.
#[derive(Debug)]
pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    counters: Arc<Counters>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral local port and starts serving.
    pub fn start(oracle: AnnotationOracle, behaviour: StubBehaviour) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let counters = Arc::new(Counters::default());
        let shared = Arc::new((oracle, behaviour));

        let handle = {
            let stop = Arc::clone(&stop);
            let counters = Arc::clone(&counters);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let shared = Arc::clone(&shared);
                    let counters = Arc::clone(&counters);
                    std::thread::spawn(move || {
                        let _ = serve(stream, &shared.0, &shared.1, &counters);
                    });
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            counters,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/answer", self.addr)
    }

    pub fn requests(&self) -> usize {
        self.counters.requests.load(Ordering::SeqCst)
    }

    /// Highest number of requests observed in progress at once.
    pub fn max_in_flight(&self) -> usize {
        self.counters.max_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(
    stream: TcpStream,
    oracle: &AnnotationOracle,
    behaviour: &StubBehaviour,
    counters: &Counters,
) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Ok(());
    }
    let mut content_length = None;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse::<usize>().ok();
            }
        }
    }
    let mut stream = stream;
    let Some(len) = content_length else {
        return respond(&mut stream, 411, "{\"error\":\"content-length required\"}");
    };
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;

    let n = counters.requests.fetch_add(1, Ordering::SeqCst) + 1;
    let now = counters.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    counters.max_in_flight.fetch_max(now, Ordering::SeqCst);
    if let Some(d) = behaviour.delay {
        std::thread::sleep(d);
    }
    let (status, reply) = handle(&body, n, oracle, behaviour);
    counters.in_flight.fetch_sub(1, Ordering::SeqCst);
    respond(&mut stream, status, &reply)
}

fn handle(
    body: &[u8],
    n: usize,
    oracle: &AnnotationOracle,
    behaviour: &StubBehaviour,
) -> (u16, String) {
    let error = |msg: &str| serde_json::json!({ "error": msg }).to_string();
    if n <= behaviour.fail_first {
        return (503, error("scripted failure"));
    }
    let Ok(request) = serde_json::from_slice::<OracleRequest>(body) else {
        return (400, error("malformed request"));
    };
    let reply = |answer: String| {
        let r = OracleResponse {
            answer,
            confidence: behaviour.confidence,
        };
        (200, serde_json::to_string(&r).expect("response serializes"))
    };
    if behaviour
        .garbage_every
        .is_some_and(|k| k > 0 && (n - behaviour.fail_first).is_multiple_of(k))
    {
        return reply("purple elephant".into());
    }
    let Some(question) = Question::parse(&request.question_text, oracle.vocabulary()) else {
        return (400, error("unrecognized question"));
    };
    match oracle.answer(&request.image_id, &question) {
        Ok(a) => reply(a.value),
        Err(e @ OracleError::UnknownImage(_)) => (404, error(&e.to_string())),
        Err(e @ OracleError::NotApplicable { .. }) => (422, error(&e.to_string())),
        Err(e) => (500, error(&e.to_string())),
    }
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) -> io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        411 => "Length Required",
        422 => "Unprocessable Entity",
        503 => "Service Unavailable",
        _ => "Internal Server Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
