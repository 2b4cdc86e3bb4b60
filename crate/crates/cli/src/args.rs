//! Value parsers for the compact list and size flags.

use std::str::FromStr;

use isolume_core::pipeline::DEFAULT_LIGHT_AREA;
use isolume_core::LightSource;

fn dims(s: &str, what: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected {what} as AxB, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("bad {what} `{s}`: {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || b == 0 {
        return Err(format!("{what} `{s}` must be at least 1x1"));
    }
    Ok((a, b))
}

/// `ROWSxCOLS`, both at least 1.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = dims(s, "map size")?;
    Ok((r as usize, c as usize))
}

/// `WIDTHxHEIGHT`, both at least 1.
pub fn parse_viewport(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = dims(s, "viewport")?;
    let fit = |v: u64| u32::try_from(v).map_err(|_| format!("viewport `{s}` is too large"));
    Ok((fit(w)?, fit(h)?))
}

pub fn parse_pair<T: FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<T>().map_err(|e| format!("bad number in `{s}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// `r,c;r,c`.
pub fn parse_cells(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_pair::<usize>).collect()
}

/// `x,y,a,b;x,y` with the default half extents for two-field entries.
pub fn parse_lights(s: &str) -> Result<Vec<LightSource>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|spec| {
            let fields: Vec<&str> = spec.split(',').map(str::trim).collect();
            let int = |v: &str| v.parse::<i32>().map_err(|e| format!("bad light `{spec}`: {e}"));
            let half = |v: &str| match v.parse::<u32>() {
                Ok(0) => Err(format!("light `{spec}` needs half extents of at least 1")),
                Ok(n) => Ok(n),
                Err(e) => Err(format!("bad light `{spec}`: {e}")),
            };
            match fields.as_slice() {
                [x, y] => Ok(LightSource::new((int(x)?, int(y)?), DEFAULT_LIGHT_AREA)),
                [x, y, a, b] => Ok(LightSource::new((int(x)?, int(y)?), (half(a)?, half(b)?))),
                _ => Err(format!("expected x,y or x,y,a,b for a light, got `{spec}`")),
            }
        })
        .collect()
}
