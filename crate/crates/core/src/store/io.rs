//! Positional reads, optionally bypassing the page cache.

use std::fs::File;
use std::io;
use std::path::Path;

#[cfg(unix)]
use std::os::unix::fs::FileExt;

const DIRECT_ALIGN: usize = 4096;

pub fn open_buffered(path: &Path) -> io::Result<File> {
    File::open(path)
}

/// Opens `path` for unbuffered reads where the platform supports it.
#[cfg(target_os = "linux")]
pub fn open_direct(path: &Path) -> io::Result<File> {
    use std::os::unix::fs::OpenOptionsExt;
    std::fs::OpenOptions::new()
        .read(true)
        .custom_flags(libc::O_DIRECT)
        .open(path)
}

#[cfg(not(target_os = "linux"))]
pub fn open_direct(_path: &Path) -> io::Result<File> {
    Err(io::Error::new(io::ErrorKind::Unsupported, "no direct I/O"))
}

#[cfg(unix)]
pub fn read_exact_at(file: &File, offset: u64, len: usize) -> io::Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    file.read_exact_at(&mut buf, offset)?;
    Ok(buf)
}

#[cfg(not(unix))]
pub fn read_exact_at(file: &File, offset: u64, len: usize) -> io::Result<Vec<u8>> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = file.try_clone()?;
    f.seek(SeekFrom::Start(offset))?;
    let mut buf = vec![0u8; len];
    f.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads `len` bytes at `offset` through a file opened with [`open_direct`].
///
/// Offset, length and buffer address are widened to the direct-I/O alignment.
#[cfg(unix)]
pub fn read_direct_at(file: &File, offset: u64, len: usize) -> io::Result<Vec<u8>> {
    let align = DIRECT_ALIGN as u64;
    let start = offset / align * align;
    let end = (offset + len as u64).div_ceil(align) * align;
    let span = (end - start) as usize;
    let mut raw = vec![0u8; span + DIRECT_ALIGN];
    let pad = raw.as_ptr().align_offset(DIRECT_ALIGN);
    let buf = &mut raw[pad..pad + span];
    let mut got = 0;
    while got < span {
        let n = file.read_at(&mut buf[got..], start + got as u64)?;
        got += n;
        // a short, unaligned read means end of file
        if n == 0 || n % DIRECT_ALIGN != 0 {
            break;
        }
    }
    let lead = (offset - start) as usize;
    if got < lead + len {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "direct read hit end of file",
        ));
    }
    Ok(buf[lead..lead + len].to_vec())
}

#[cfg(not(unix))]
pub fn read_direct_at(file: &File, offset: u64, len: usize) -> io::Result<Vec<u8>> {
    read_exact_at(file, offset, len)
}
