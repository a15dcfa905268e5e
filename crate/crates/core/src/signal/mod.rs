//! Satellite signal structures: C/A codes, the navigation frame, and the
//! compact identity-plus-time message.

pub mod compact;
pub mod gold;
pub mod nav;

pub use compact::{build_compact_message, parse_compact_message, CompactError, CompactMessage};
pub use gold::{correlate, generate_ca_code, identify_satellite, Acquisition, CodeBank, CodeError, PrnCode, CA_CODE_LEN};
pub use nav::{
    build_nav_frame, parse_nav_frame, Almanac, AlmanacAssembler, AlmanacEntry, AlmanacPage, ClockFields, Ephemeris,
    IonoModel, NavError, NavFrame, ParsedFrame,
};
