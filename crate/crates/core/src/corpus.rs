//! Example systems bundled with the analyzer.

pub const MEMORY: &str = include_str!("../corpus/memory.pi");
pub const SEMAPHORE2: &str = include_str!("../corpus/semaphore2.pi");
pub const SYNCCOMM: &str = include_str!("../corpus/synccomm.pi");
pub const OBJECTS: &str = include_str!("../corpus/objects.pi");
pub const DLIST: &str = include_str!("../corpus/dlist.pi");

/// Every bundled system with its file stem.
pub const ALL: [(&str, &str); 5] = [
    ("memory", MEMORY),
    ("semaphore2", SEMAPHORE2),
    ("synccomm", SYNCCOMM),
    ("objects", OBJECTS),
    ("dlist", DLIST),
];
