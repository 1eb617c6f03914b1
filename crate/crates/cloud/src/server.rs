// Copyright 2026 The RISK Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Framed TCP service, one thread per connection.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use risk_core::wire::{Frame, WireError, DEFAULT_MAX_FRAME};

use crate::store::CloudIndex;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    /// Largest accepted request payload; bounds per-connection memory.
    pub max_frame: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_frame: DEFAULT_MAX_FRAME,
        }
    }
}

pub struct Server {
    listener: TcpListener,
    index: Arc<CloudIndex>,
    config: ServerConfig,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, index: Arc<CloudIndex>, config: ServerConfig) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            index,
            config,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let index = Arc::clone(&self.index);
            let config = self.config;
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_connection(stream, &index, config) {
                    log::debug!("connection {peer:?} closed: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || {
            if let Err(e) = self.run() {
                log::error!("server stopped: {e}");
            }
        });
        Ok(addr)
    }
}

/// Serves request frames until the peer hangs up. A malformed frame gets an
/// error reply and ends the connection, since stream framing is then lost.
pub fn serve_connection(stream: TcpStream, index: &CloudIndex, config: ServerConfig) -> Result<(), WireError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        match Frame::read_from(&mut reader, config.max_frame) {
            Ok(Some(frame)) => index.handle_frame(frame).write_to(&mut writer)?,
            Ok(None) => return Ok(()),
            Err(WireError::Io(e)) => return Err(WireError::Io(e)),
            Err(e) => {
                let _ = Frame::error(&e).write_to(&mut writer);
                return Err(e);
            }
        }
    }
}
