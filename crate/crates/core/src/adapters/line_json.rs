//! Line-delimited JSON wire protocol for out-of-process QA backends.
//!
//! Request: `{"input_text": ..., "n_samples": k, "prompt": ...}`.
//! Response: `{"answers": [k strings]}`, or `{"answers": [], "error": ...}`.
//! One JSON object per line, over a child's stdio or a Unix socket.

use std::io::{self, BufRead, BufReader, Write};
use std::os::unix::net::UnixStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::ports::{PortError, PortKind, QaPort, QaQuery};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRequest {
    pub input_text: String,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaResponse {
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

type Channel = (Box<dyn BufRead + Send>, Box<dyn Write + Send>);

/// QA port backed by a line-JSON peer.
pub struct LineJsonQa {
    channel: Mutex<Channel>,
    child: Option<Mutex<Child>>,
}

impl LineJsonQa {
    pub fn from_streams(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        LineJsonQa { channel: Mutex::new((Box::new(reader), Box::new(writer))), child: None }
    }

    /// Starts `program` and talks to it over its stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut qa = Self::from_streams(stdout, stdin);
        qa.child = Some(Mutex::new(child));
        Ok(qa)
    }

    pub fn connect(socket: impl AsRef<Path>) -> io::Result<Self> {
        let stream = UnixStream::connect(socket)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::from_streams(reader, stream))
    }

    fn round_trip(&self, req: &QaRequest) -> Result<QaResponse, String> {
        let mut guard = self.channel.lock().map_err(|_| "channel poisoned".to_owned())?;
        let (reader, writer) = &mut *guard;
        let mut line = serde_json::to_string(req).map_err(|e| e.to_string())?;
        line.push('\n');
        writer.write_all(line.as_bytes()).map_err(|e| e.to_string())?;
        writer.flush().map_err(|e| e.to_string())?;
        let mut reply = String::new();
        if reader.read_line(&mut reply).map_err(|e| e.to_string())? == 0 {
            return Err("backend closed the connection".into());
        }
        serde_json::from_str(&reply).map_err(|e| format!("bad response: {e}"))
    }
}

impl QaPort for LineJsonQa {
    fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
        let req = QaRequest { input_text: q.input_text.to_owned(), n_samples: q.n_samples, prompt: q.prompt.to_owned() };
        let resp = self.round_trip(&req).map_err(|m| PortError::new(PortKind::Qa, m))?;
        if let Some(err) = resp.error {
            return Err(PortError::new(PortKind::Qa, err));
        }
        Ok(resp.answers)
    }
}

impl Drop for LineJsonQa {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut c) = child.lock() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
}

/// Answers line-JSON requests from `reader` with `port` until EOF.
/// Returns the number of requests served.
pub fn serve_qa<R: BufRead, W: Write>(reader: R, mut writer: W, port: &dyn QaPort) -> io::Result<usize> {
    let mut served = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<QaRequest>(&line) {
            Ok(req) => {
                let q = QaQuery { input_text: &req.input_text, prompt: &req.prompt, n_samples: req.n_samples };
                match port.answer(&q) {
                    Ok(answers) => QaResponse { answers, error: None },
                    Err(e) => QaResponse { answers: vec![], error: Some(e.message) },
                }
            }
            Err(e) => QaResponse { answers: vec![], error: Some(format!("bad request: {e}")) },
        };
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        served += 1;
    }
    Ok(served)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{ConstantQa, ScriptedQa};

    #[test]
    fn wire_format() {
        let req = QaRequest { input_text: "i am a wave".into(), n_samples: 3, prompt: String::new() };
        assert_eq!(serde_json::to_string(&req).unwrap(), r#"{"input_text":"i am a wave","n_samples":3}"#);
        let resp: QaResponse = serde_json::from_str(r#"{"answers":["a","b","c"]}"#).unwrap();
        assert_eq!(resp.answers.len(), 3);
    }

    #[test]
    fn serve_handles_bad_lines() {
        let input = "{\"input_text\":\"x\",\"n_samples\":2}\nnot json\n\n";
        let mut out = Vec::new();
        let served = serve_qa(input.as_bytes(), &mut out, &ConstantQa::new("cell")).unwrap();
        assert_eq!(served, 2);
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines[0], r#"{"answers":["cell","cell"]}"#);
        assert!(lines[1].contains("bad request"));
    }

    #[test]
    fn client_over_socket_pair() {
        let (client_end, server_end) = UnixStream::pair().unwrap();
        let server = std::thread::spawn(move || {
            let reader = BufReader::new(server_end.try_clone().unwrap());
            let port = ScriptedQa::new(vec![Ok(vec!["a".into(), "b".into()]), Err("overloaded".into())]);
            serve_qa(reader, server_end, &port).unwrap()
        });
        let reader = BufReader::new(client_end.try_clone().unwrap());
        let qa = LineJsonQa::from_streams(reader, client_end.try_clone().unwrap());
        let q = QaQuery { input_text: "i am", prompt: "p", n_samples: 2 };
        assert_eq!(qa.answer(&q).unwrap(), vec!["a", "b"]);
        let err = qa.answer(&q).unwrap_err();
        assert_eq!(err.message, "overloaded");
        client_end.shutdown(std::net::Shutdown::Both).unwrap();
        drop(qa);
        assert_eq!(server.join().unwrap(), 2);
    }
}
