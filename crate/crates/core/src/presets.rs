//! Bundled example images selectable by id instead of uploading.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub id: &'static str,
    pub label: &'static str,
    /// Encoded PNG.
    pub bytes: &'static [u8],
}

pub const PRESETS: &[Preset] = &[
    Preset {
        id: "bell_pepper",
        label: "red bell pepper",
        bytes: include_bytes!("../fixtures/presets/bell_pepper.png"),
    },
    Preset {
        id: "orange",
        label: "orange",
        bytes: include_bytes!("../fixtures/presets/orange.png"),
    },
    Preset {
        id: "lifeboat",
        label: "lifeboat on water",
        bytes: include_bytes!("../fixtures/presets/lifeboat.png"),
    },
];

pub fn find(id: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.id == id)
}
