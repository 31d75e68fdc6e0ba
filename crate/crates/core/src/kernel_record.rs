//! Fixed-size wire records produced by the kernel-side probes.
//!
//! Layout (little-endian, natural C alignment, 168 bytes):
//!
//! | offset | size | field                                  |
//! |-------:|-----:|----------------------------------------|
//! |      0 |    4 | pid                                    |
//! |      4 |    4 | uid                                    |
//! |      8 |   16 | comm, NUL-padded                       |
//! |     24 |    1 | kind tag                               |
//! |     25 |    3 | padding (zero)                         |
//! |     28 |    4 | open flags, or lost-record count       |
//! |     32 |  128 | path, NUL-padded                       |
//! |    160 |    8 | timestamp_ns                           |
//!
//! Kind tags: 1 exec, 2 open, 3 exit, 0xff lost-records notice.

use std::ffi::OsString;
use std::io::{self, Read};
use std::os::unix::ffi::{OsStrExt, OsStringExt};
use std::path::PathBuf;

use thiserror::Error;

use crate::event::{EventError, EventKind, OpenFlags, SyscallEvent, COMM_MAX_BYTES, OPEN_PATH_MAX_BYTES};

pub const RECORD_SIZE: usize = 168;

pub const KIND_EXEC: u8 = 1;
pub const KIND_OPEN: u8 = 2;
pub const KIND_EXIT: u8 = 3;
pub const KIND_LOST: u8 = 0xff;

const OFF_PID: usize = 0;
const OFF_UID: usize = 4;
const OFF_COMM: usize = 8;
const OFF_KIND: usize = 24;
const OFF_FLAGS: usize = 28;
const OFF_PATH: usize = 32;
const OFF_TS: usize = 160;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("unknown kind tag {0:#04x}")]
    UnknownKind(u8),
    #[error("comm is not valid UTF-8")]
    CommEncoding,
    #[error(transparent)]
    Invariant(#[from] EventError),
    #[error("truncated record: {0} of {RECORD_SIZE} bytes")]
    Truncated(usize),
    #[error("i/o error reading records: {0}")]
    Io(#[from] io::Error),
}

/// A decoded wire record: either an event or a notice that the kernel side
/// dropped records because the transport was full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelRecord {
    Event(SyscallEvent),
    Lost(u32),
}

fn u32_at(buf: &[u8; RECORD_SIZE], off: usize) -> u32 {
    u32::from_le_bytes(buf[off..off + 4].try_into().unwrap())
}

fn nul_terminated(bytes: &[u8]) -> &[u8] {
    let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
    &bytes[..end]
}

pub fn decode_record(buf: &[u8; RECORD_SIZE]) -> Result<KernelRecord, RecordError> {
    let kind_tag = buf[OFF_KIND];
    let flags = u32_at(buf, OFF_FLAGS);
    if kind_tag == KIND_LOST {
        return Ok(KernelRecord::Lost(flags));
    }
    let pid = u32_at(buf, OFF_PID);
    let uid = u32_at(buf, OFF_UID);
    let comm = std::str::from_utf8(nul_terminated(&buf[OFF_COMM..OFF_COMM + COMM_MAX_BYTES]))
        .map_err(|_| RecordError::CommEncoding)?;
    let path = PathBuf::from(OsString::from_vec(
        nul_terminated(&buf[OFF_PATH..OFF_PATH + OPEN_PATH_MAX_BYTES]).to_vec(),
    ));
    let ts = u64::from_le_bytes(buf[OFF_TS..OFF_TS + 8].try_into().unwrap());
    let kind = match kind_tag {
        KIND_EXEC => EventKind::exec(path),
        KIND_OPEN => EventKind::open(path, OpenFlags::from_raw(flags)),
        KIND_EXIT => EventKind::Exit,
        other => return Err(RecordError::UnknownKind(other)),
    };
    Ok(KernelRecord::Event(SyscallEvent::new(ts, pid, uid, comm, kind)?))
}

/// Encodes an event in the wire layout. Paths longer than 128 bytes are
/// truncated, as the kernel side does.
pub fn encode_record(event: &SyscallEvent) -> [u8; RECORD_SIZE] {
    let mut buf = [0u8; RECORD_SIZE];
    buf[OFF_PID..OFF_PID + 4].copy_from_slice(&event.pid.to_le_bytes());
    buf[OFF_UID..OFF_UID + 4].copy_from_slice(&event.uid.to_le_bytes());
    let comm = event.comm.as_bytes();
    let n = comm.len().min(COMM_MAX_BYTES);
    buf[OFF_COMM..OFF_COMM + n].copy_from_slice(&comm[..n]);
    let (tag, flags, path) = match &event.kind {
        EventKind::Exec { exe_path } => (KIND_EXEC, 0, exe_path.as_os_str().as_bytes()),
        EventKind::FileOpen { path, flags } => (KIND_OPEN, flags.raw(), path.as_os_str().as_bytes()),
        EventKind::Exit => (KIND_EXIT, 0, &[][..]),
    };
    buf[OFF_KIND] = tag;
    buf[OFF_FLAGS..OFF_FLAGS + 4].copy_from_slice(&flags.to_le_bytes());
    let n = path.len().min(OPEN_PATH_MAX_BYTES);
    buf[OFF_PATH..OFF_PATH + n].copy_from_slice(&path[..n]);
    buf[OFF_TS..OFF_TS + 8].copy_from_slice(&event.timestamp_ns.to_le_bytes());
    buf
}

pub fn encode_lost(count: u32) -> [u8; RECORD_SIZE] {
    let mut buf = [0u8; RECORD_SIZE];
    buf[OFF_KIND] = KIND_LOST;
    buf[OFF_FLAGS..OFF_FLAGS + 4].copy_from_slice(&count.to_le_bytes());
    buf
}

/// Reads consecutive records from a byte stream (pipe, FIFO or file).
pub struct RecordReader<R> {
    inner: R,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    /// `Ok(None)` at a clean end of stream; a partial trailing record is an error.
    pub fn read_record(&mut self) -> Result<Option<KernelRecord>, RecordError> {
        let mut buf = [0u8; RECORD_SIZE];
        let mut filled = 0;
        while filled < RECORD_SIZE {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(RecordError::Truncated(filled)),
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        decode_record(&buf).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets_are_exact() {
        let ev = SyscallEvent::new(
            0x0102030405060708,
            0xAABBCCDD,
            1000,
            "true",
            EventKind::open("/tmp/x", OpenFlags::from_raw(0o101)),
        )
        .unwrap();
        let buf = encode_record(&ev);
        assert_eq!(&buf[0..4], &[0xDD, 0xCC, 0xBB, 0xAA]);
        assert_eq!(&buf[4..8], &1000u32.to_le_bytes());
        assert_eq!(&buf[8..13], b"true\0");
        assert_eq!(buf[24], KIND_OPEN);
        assert_eq!(&buf[25..28], &[0, 0, 0]);
        assert_eq!(&buf[28..32], &65u32.to_le_bytes());
        assert_eq!(&buf[32..39], b"/tmp/x\0");
        assert_eq!(&buf[160..168], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(decode_record(&buf).unwrap(), KernelRecord::Event(ev));
    }

    #[test]
    fn full_width_fields_have_no_terminator() {
        let path = format!("/{}", "p".repeat(127));
        let ev = SyscallEvent::new(1, 9, 0, "sixteen-chars-xx", EventKind::open(&path, OpenFlags::from_raw(0o100)))
            .unwrap();
        let buf = encode_record(&ev);
        assert_eq!(decode_record(&buf).unwrap(), KernelRecord::Event(ev));
    }

    #[test]
    fn stream_with_lost_notice_and_truncation() {
        let ev = SyscallEvent::new(3, 5, 0, "sh", EventKind::exec("/bin/sh")).unwrap();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&encode_record(&ev));
        bytes.extend_from_slice(&encode_lost(17));
        bytes.extend_from_slice(&[1, 2, 3]);
        let mut reader = RecordReader::new(&bytes[..]);
        assert_eq!(reader.read_record().unwrap(), Some(KernelRecord::Event(ev)));
        assert_eq!(reader.read_record().unwrap(), Some(KernelRecord::Lost(17)));
        assert!(matches!(reader.read_record(), Err(RecordError::Truncated(3))));
    }

    #[test]
    fn bad_records_rejected() {
        let mut buf = [0u8; RECORD_SIZE];
        buf[OFF_KIND] = KIND_EXIT;
        buf[OFF_COMM] = b'a';
        assert!(matches!(decode_record(&buf), Err(RecordError::Invariant(EventError::ZeroPid))));
        buf[OFF_KIND] = 9;
        assert!(matches!(decode_record(&buf), Err(RecordError::UnknownKind(9))));
        assert!(RecordReader::new(&[][..]).read_record().unwrap().is_none());
    }
}
