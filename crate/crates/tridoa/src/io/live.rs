//! Live processing of raw interleaved PCM.
//!
//! A reader thread decodes hop-sized chunks and hands them to the pipeline
//! thread through a bounded channel, so a slow pipeline blocks the reader
//! instead of buffering without limit. Frames are assembled from consecutive
//! hops and match file processing exactly.

use std::io::{ErrorKind, Read};
use std::sync::mpsc::sync_channel;

use tridoa_core::pipeline::{FrameEvent, Pipeline};

use super::wav::PcmFormat;
use crate::error::{Error, Result};

pub const DEFAULT_QUEUE_DEPTH: usize = 32;

type Hop = [Vec<f64>; 3];

/// Fills `buf` completely; `Ok(false)` on a clean or partial end of stream.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => return Ok(false),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Runs `pipeline` over a raw stream and passes every frame event to `sink`.
/// Returns the number of frames processed. A trailing partial hop is dropped.
pub fn process_raw<R, F>(
    mut reader: R,
    format: PcmFormat,
    pipeline: &mut Pipeline,
    queue_depth: usize,
    mut sink: F,
) -> Result<usize>
where
    R: Read + Send,
    F: FnMut(FrameEvent) -> Result<()>,
{
    let hop = pipeline.config().hop();
    let width = format.bytes();
    let (tx, rx) = sync_channel::<std::io::Result<Hop>>(queue_depth.max(1));

    std::thread::scope(|scope| {
        scope.spawn(move || {
            let mut buf = vec![0u8; hop * 3 * width];
            loop {
                match read_full(&mut reader, &mut buf) {
                    Ok(true) => {
                        let mut chunk: Hop = std::array::from_fn(|_| Vec::with_capacity(hop));
                        for frame in buf.chunks_exact(3 * width) {
                            for (c, bytes) in chunk.iter_mut().zip(frame.chunks_exact(width)) {
                                c.push(format.decode(bytes));
                            }
                        }
                        if tx.send(Ok(chunk)).is_err() {
                            return;
                        }
                    }
                    Ok(false) => return,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        return;
                    }
                }
            }
        });

        let mut prev: Option<Hop> = None;
        let mut frame: Hop = std::array::from_fn(|_| Vec::with_capacity(2 * hop));
        let mut count = 0;
        for item in rx {
            let cur = item.map_err(|e| Error::io("<stdin>", e))?;
            if let Some(p) = &prev {
                for i in 0..3 {
                    frame[i].clear();
                    frame[i].extend_from_slice(&p[i]);
                    frame[i].extend_from_slice(&cur[i]);
                }
                let ev = pipeline.process_frame([&frame[0], &frame[1], &frame[2]])?;
                sink(ev)?;
                count += 1;
            }
            prev = Some(cur);
        }
        Ok(count)
    })
}
