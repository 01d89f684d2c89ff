//! Helpers for the versioned CSV formats.

use std::io;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Check the version line and the column line of a CSV file.
pub(crate) fn expect_header<I>(lines: &mut I, version: &str, columns: &str) -> Result<()>
where
    I: Iterator<Item = (usize, io::Result<String>)>,
{
    let found = match lines.next() {
        Some((_, line)) => line?,
        None => String::new(),
    };
    if found.trim_end() != version {
        return Err(Error::Format {
            expected: version.to_string(),
            found,
        });
    }
    let found = match lines.next() {
        Some((_, line)) => line?,
        None => String::new(),
    };
    if found.trim_end() != columns {
        return Err(Error::Format {
            expected: columns.to_string(),
            found,
        });
    }
    Ok(())
}

/// Sequential field parser over one comma-separated line.
pub(crate) struct Fields<'a> {
    parts: std::str::Split<'a, char>,
    line: usize,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(text: &'a str, line: usize) -> Self {
        Fields {
            parts: text.trim_end().split(','),
            line,
        }
    }

    fn next_raw(&mut self) -> Result<&'a str> {
        self.parts.next().ok_or_else(|| Error::Parse {
            line: self.line,
            msg: "too few fields".into(),
        })
    }

    pub(crate) fn parse<T>(&mut self) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = self.next_raw()?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            line: self.line,
            msg: format!("`{raw}`: {e}"),
        })
    }

    /// Empty field → `None`.
    pub(crate) fn parse_opt<T>(&mut self) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = self.next_raw()?;
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse().map(Some).map_err(|e: T::Err| Error::Parse {
            line: self.line,
            msg: format!("`{raw}`: {e}"),
        })
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        match self.parts.next() {
            None => Ok(()),
            Some(_) => Err(Error::Parse {
                line: self.line,
                msg: "too many fields".into(),
            }),
        }
    }
}
