//! Little-endian reads that report the byte offset of the first failure.

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pub(crate) at: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, at: 0, path }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.error(format!("truncated file while reading {what}")));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Next whitespace-delimited ASCII token; `#` starts a comment that runs
    /// to the end of the line.
    pub(crate) fn token(&mut self, what: &str) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.at) {
                Some(b'#') => {
                    while self.bytes.get(self.at).is_some_and(|&b| b != b'\n') {
                        self.at += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.at += 1,
                Some(_) => break,
                None => return Err(self.error(format!("truncated header while reading {what}"))),
            }
        }
        let start = self.at;
        while self.bytes.get(self.at).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.at += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.at]).map_err(|_| self.error_at(start, format!("{what} is not ASCII")))
    }

    /// A decimal header field.
    pub(crate) fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.skip_to_token();
        let tok = self.token(what)?;
        tok.parse().map_err(|_| self.error_at(start, format!("expected {what}, found {tok:?}")))
    }

    /// Consume exactly one whitespace byte, the separator between a text
    /// header and binary data.
    pub(crate) fn single_whitespace(&mut self, what: &str) -> Result<()> {
        match self.bytes.get(self.at) {
            Some(b) if b.is_ascii_whitespace() => {
                self.at += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected whitespace before {what}"))),
        }
    }

    pub(crate) fn skip_to_token(&self) -> usize {
        let mut at = self.at;
        while self.bytes.get(at).is_some_and(|b| b.is_ascii_whitespace()) {
            at += 1;
        }
        at
    }

    pub(crate) fn error(&self, message: String) -> Error {
        self.error_at(self.at, message)
    }

    pub(crate) fn error_at(&self, at: usize, message: String) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: at as u64,
            message,
        }
    }
}
