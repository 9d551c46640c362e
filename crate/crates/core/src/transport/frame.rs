//! Length-prefixed framing: a 4-byte little-endian payload length followed by
//! the payload. Zero-length payloads are legal.

use std::io::{self, Read, Write};

use super::TransportError;

pub const FRAME_HEADER_BYTES: usize = 4;

pub fn encode_frame(payload: &[u8]) -> Result<Vec<u8>, TransportError> {
    let len = frame_len(payload)?;
    let mut out = Vec::with_capacity(FRAME_HEADER_BYTES + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Split one frame off the front of `buf`, returning `(payload, rest)`.
pub fn decode_frame(buf: &[u8]) -> Result<(&[u8], &[u8]), TransportError> {
    if buf.len() < FRAME_HEADER_BYTES {
        return Err(TransportError::MalformedFrame(format!(
            "{} bytes is shorter than the frame header",
            buf.len()
        )));
    }
    let len = u32::from_le_bytes(buf[..4].try_into().expect("4 bytes")) as usize;
    let body = &buf[FRAME_HEADER_BYTES..];
    if body.len() < len {
        return Err(TransportError::MalformedFrame(format!(
            "header announces {len} payload bytes but only {} follow",
            body.len()
        )));
    }
    Ok(body.split_at(len))
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, payload: &[u8]) -> Result<(), TransportError> {
    let len = frame_len(payload)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Read one frame and return its payload.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut header = [0u8; FRAME_HEADER_BYTES];
    r.read_exact(&mut header)?;
    let len = u32::from_le_bytes(header) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(payload)
}

fn frame_len(payload: &[u8]) -> Result<u32, TransportError> {
    u32::try_from(payload.len()).map_err(|_| TransportError::FrameTooLarge(payload.len()))
}
