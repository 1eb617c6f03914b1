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

//! Request/response channels to the cloud.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::{Duration, Instant};

use risk_cloud::CloudIndex;
use risk_core::wire::{Frame, WireError, DEFAULT_MAX_FRAME, FRAME_HEADER_LEN};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferStats {
    pub exchanges: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Time spent waiting on the cloud, network included.
    pub cloud_time: Duration,
}

pub trait Transport {
    fn exchange(&mut self, request: &Frame) -> Result<Frame>;

    /// Cumulative counters since the transport was created.
    fn stats(&self) -> TransferStats;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn exchange(&mut self, request: &Frame) -> Result<Frame> {
        (**self).exchange(request)
    }

    fn stats(&self) -> TransferStats {
        (**self).stats()
    }
}

/// In-process transport. Requests still go through the byte encoding, so
/// the traffic can be captured and inspected.
pub struct Loopback {
    cloud: Arc<CloudIndex>,
    stats: TransferStats,
    capture: Option<Vec<u8>>,
}

impl Loopback {
    pub fn new(cloud: Arc<CloudIndex>) -> Self {
        Self {
            cloud,
            stats: TransferStats::default(),
            capture: None,
        }
    }

    /// Records every byte sent and received.
    pub fn with_capture(mut self) -> Self {
        self.capture = Some(Vec::new());
        self
    }

    pub fn cloud(&self) -> &Arc<CloudIndex> {
        &self.cloud
    }

    pub fn take_capture(&mut self) -> Vec<u8> {
        self.capture.as_mut().map(std::mem::take).unwrap_or_default()
    }
}

impl Transport for Loopback {
    fn exchange(&mut self, request: &Frame) -> Result<Frame> {
        let sent = request.to_bytes();
        let started = Instant::now();
        let received = self
            .cloud
            .handle_frame(Frame::from_bytes(&sent, DEFAULT_MAX_FRAME)?)
            .to_bytes();
        self.stats.cloud_time += started.elapsed();
        self.stats.exchanges += 1;
        self.stats.bytes_sent += sent.len() as u64;
        self.stats.bytes_received += received.len() as u64;
        if let Some(cap) = self.capture.as_mut() {
            cap.extend_from_slice(&sent);
            cap.extend_from_slice(&received);
        }
        Ok(Frame::from_bytes(&received, DEFAULT_MAX_FRAME)?)
    }

    fn stats(&self) -> TransferStats {
        self.stats
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    max_frame: usize,
    stats: TransferStats,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            max_frame: DEFAULT_MAX_FRAME,
            stats: TransferStats::default(),
        })
    }
}

impl Transport for TcpTransport {
    fn exchange(&mut self, request: &Frame) -> Result<Frame> {
        let started = Instant::now();
        request.write_to(&mut self.writer)?;
        let reply = Frame::read_from(&mut self.reader, self.max_frame)?
            .ok_or_else(|| WireError::Malformed("cloud closed the connection".into()))?;
        self.stats.cloud_time += started.elapsed();
        self.stats.exchanges += 1;
        self.stats.bytes_sent += (FRAME_HEADER_LEN + request.payload.len()) as u64;
        self.stats.bytes_received += (FRAME_HEADER_LEN + reply.payload.len()) as u64;
        Ok(reply)
    }

    fn stats(&self) -> TransferStats {
        self.stats
    }
}
