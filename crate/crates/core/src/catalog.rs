//! Category vocabularies for each object set.

use serde::{Deserialize, Serialize};

use crate::assets::AssetLibrary;
use crate::error::{Error, Result};
use crate::model::ObjectSet;

pub const SHAPES: [&str; 5] = ["circle", "pentagon", "rectangle", "square", "triangle"];

pub const EASY_OBJECTS: [&str; 5] = ["bolt", "chain", "hardhat", "pickup truck", "tree"];

/// Stand-in vocabulary for the single-image-per-category tool set.
pub const FALLBACK_TOOLS: [&str; 87] = [
    "hammer",
    "saw",
    "carpet knife",
    "drill",
    "heat gun",
    "wrench",
    "screwdriver",
    "pliers",
    "chisel",
    "file",
    "tape measure",
    "spirit level",
    "clamp",
    "vise",
    "mallet",
    "crowbar",
    "hacksaw",
    "jigsaw",
    "circular saw",
    "angle grinder",
    "sander",
    "router",
    "planer",
    "nail gun",
    "staple gun",
    "soldering iron",
    "glue gun",
    "multimeter",
    "socket wrench",
    "torque wrench",
    "pipe wrench",
    "adjustable wrench",
    "allen key",
    "wire stripper",
    "crimping tool",
    "bolt cutter",
    "tin snips",
    "utility knife",
    "scraper",
    "putty knife",
    "trowel",
    "paint brush",
    "paint roller",
    "caulking gun",
    "rivet gun",
    "impact driver",
    "rotary tool",
    "bench grinder",
    "belt sander",
    "orbital sander",
    "miter saw",
    "table saw",
    "band saw",
    "chainsaw",
    "pry bar",
    "sledgehammer",
    "axe",
    "hatchet",
    "shovel",
    "rake",
    "hoe",
    "pickaxe",
    "wheelbarrow",
    "ladder",
    "toolbox",
    "flashlight",
    "work light",
    "extension cord",
    "air compressor",
    "pressure washer",
    "welding torch",
    "welding helmet",
    "safety goggles",
    "ear muffs",
    "work gloves",
    "respirator",
    "stud finder",
    "laser level",
    "chalk line",
    "plumb bob",
    "calipers",
    "micrometer",
    "feeler gauge",
    "pipe cutter",
    "tube bender",
    "hex driver",
    "grease gun",
];

/// Stand-in vocabulary for the many-images-per-category tool set.
pub const FALLBACK_HARD: &[&str] = &[
    "Heat Guns",
    "Hammers",
    "Hand Saws",
    "Carpet Knives",
    "Cordless Drills",
    "Hammer Drills",
    "Combination Wrenches",
    "Flathead Screwdrivers",
    "Phillips Screwdrivers",
    "Needle Nose Pliers",
    "Slip Joint Pliers",
    "Locking Pliers",
    "Wood Chisels",
    "Cold Chisels",
    "Metal Files",
    "Tape Measures",
    "Spirit Levels",
    "Bar Clamps",
    "C Clamps",
    "Spring Clamps",
    "Bench Vises",
    "Rubber Mallets",
    "Crowbars",
    "Hacksaws",
    "Jigsaws",
    "Circular Saws",
    "Angle Grinders",
    "Detail Sanders",
    "Plunge Routers",
    "Hand Planers",
    "Framing Nailers",
    "Brad Nailers",
    "Staple Guns",
    "Soldering Irons",
    "Soldering Stations",
    "Hot Glue Guns",
    "Digital Multimeters",
    "Clamp Meters",
    "Socket Sets",
    "Torque Wrenches",
    "Pipe Wrenches",
    "Adjustable Wrenches",
    "Hex Key Sets",
    "Wire Strippers",
    "Crimping Tools",
    "Bolt Cutters",
    "Tin Snips",
    "Utility Knives",
    "Paint Scrapers",
    "Putty Knives",
    "Masonry Trowels",
    "Paint Brushes",
    "Paint Rollers",
    "Caulking Guns",
    "Pop Rivet Guns",
    "Impact Drivers",
    "Impact Wrenches",
    "Rotary Tools",
    "Bench Grinders",
    "Belt Sanders",
    "Random Orbit Sanders",
    "Miter Saws",
    "Table Saws",
    "Band Saws",
    "Chainsaws",
    "Pry Bars",
    "Sledgehammers",
    "Axes",
    "Hatchets",
    "Spades",
    "Leaf Rakes",
    "Garden Hoes",
    "Pickaxes",
    "Wheelbarrows",
    "Step Ladders",
    "Extension Ladders",
    "Tool Boxes",
    "Tool Chests",
    "Flashlights",
    "Headlamps",
    "Work Lights",
    "Extension Cords",
    "Air Compressors",
    "Pressure Washers",
    "Welding Torches",
    "Welding Helmets",
    "Safety Goggles",
    "Ear Muffs",
    "Work Gloves",
    "Respirators",
    "Stud Finders",
    "Laser Levels",
    "Chalk Lines",
    "Plumb Bobs",
    "Vernier Calipers",
    "Micrometers",
    "Feeler Gauges",
    "Pipe Cutters",
    "Tube Benders",
    "Hex Drivers",
    "Grease Guns",
    "Oil Cans",
    "Tap Wrenches",
    "Die Stocks",
    "Reciprocating Saws",
    "Oscillating Tools",
    "Heat Shrink Tubing",
    "Cable Ties",
    "Zip Tie Guns",
    "Wire Brushes",
    "Drill Bits",
    "Hole Saws",
    "Countersinks",
    "Center Punches",
    "Nail Sets",
    "Scribers",
    "Engineer Squares",
    "Bevel Gauges",
];

/// What to do when an object set needs a pack that is not installed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectFallback {
    Error,
    ProceduralGlyph,
}

/// Resolves the category vocabulary of `set`: the installed pack if there is
/// one, otherwise the built-in stand-in list when glyph fallback is allowed.
pub fn categories(set: &ObjectSet, assets: &AssetLibrary, fallback: ObjectFallback) -> Result<Vec<String>> {
    let Some(pack_name) = set.pack_name() else {
        return Ok(SHAPES.iter().map(|s| s.to_string()).collect());
    };
    if let Some(pack) = assets.pack(pack_name)? {
        return Ok(pack.category_names());
    }
    let builtin: &[&str] = match set {
        ObjectSet::Easy => &EASY_OBJECTS,
        ObjectSet::Tool => &FALLBACK_TOOLS,
        ObjectSet::Hard => FALLBACK_HARD,
        _ => &[],
    };
    match fallback {
        ObjectFallback::ProceduralGlyph if !builtin.is_empty() => Ok(builtin.iter().map(|s| s.to_string()).collect()),
        _ => Err(Error::MissingAsset {
            pack: pack_name.to_string(),
            reason: match assets.root() {
                Some(root) => format!("no {}/{pack_name}/pack.json and no usable fallback", root.display()),
                None => "no asset root configured and no usable fallback".into(),
            },
        }),
    }
}
