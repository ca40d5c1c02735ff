"""Seeded synthetic GUI corpus over eight topic templates.

Every layout is exactly aligned by construction (shared left edges, equal
sizes, uniform gaps), so the constraint extractor recovers a known set and
desk-scale training has real signal. Topics double as classification labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BBox, Element, Gui

TOPICS = ("form", "gallery", "list", "login", "menu", "profile", "settings", "tutorial")

COMMON_TEXTS = ("Submit", "Cancel", "OK", "Settings", "Login", "Search",
                "Profile", "Next", "Back", "Menu", "Share", "Save")


@dataclass(frozen=True)
class SynthConfig:
    canvas_w: int = 360
    canvas_h: int = 640


def _text(rng: np.random.Generator) -> str:
    # Mostly common strings (frequent enough to dodge the UNK rule), with a
    # sprinkle of near-unique ones so the rule actually fires in training.
    if rng.random() < 0.8:
        return COMMON_TEXTS[int(rng.integers(len(COMMON_TEXTS)))]
    return f"label-{int(rng.integers(10_000))}"


class _Builder:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.elements: list[Element] = []

    def add(self, kind: str, x: int, y: int, w: int, h: int, text: str | None = None) -> None:
        eid = f"e{len(self.elements)}"
        self.elements.append(Element(eid, kind, BBox(x, y, w, h), text))

    def gui(self, topic: str) -> Gui:
        return Gui(self.cfg.canvas_w, self.cfg.canvas_h, tuple(self.elements), topic)


def _list_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    margin = int(rng.integers(12, 33))
    item_h = int(rng.integers(40, 81))
    gap = int(rng.integers(6, 17))
    n = int(rng.integers(4, 9))
    w = cfg.canvas_w - 2 * margin
    y = int(rng.integers(16, 81))
    for _ in range(n):
        if y + item_h > cfg.canvas_h - 8:
            break
        b.add("ListItem", margin, y, w, item_h, _text(rng))
        y += item_h + gap
    return b.gui("list")


def _gallery_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    # at least 3x3 so removing one cell leaves its row and column lines alive
    b = _Builder(cfg)
    cols = 3
    rows = int(rng.integers(3, 5))
    gap = int(rng.integers(8, 17))
    margin = int(rng.integers(12, 25))
    cell_w = (cfg.canvas_w - 2 * margin - (cols - 1) * gap) // cols
    cell_h = int(cell_w * rng.uniform(0.8, 1.2))
    y0 = int(rng.integers(24, 73))
    for r in range(rows):
        y = y0 + r * (cell_h + gap)
        if y + cell_h > cfg.canvas_h - 8:
            break
        for c in range(cols):
            b.add("Image", margin + c * (cell_w + gap), y, cell_w, cell_h)
    return b.gui("gallery")


def _login_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    cx = cfg.canvas_w // 2
    if rng.random() < 0.5:
        return _pin_login_gui(b, rng, cfg, cx)
    logo = int(rng.integers(72, 121))
    y = int(rng.integers(48, 97))
    b.add("Image", cx - logo // 2, y, logo, logo)
    y += logo + int(rng.integers(24, 49))
    field_w = int(rng.integers(220, 281))
    field_h = int(rng.integers(36, 53))
    gap = int(rng.integers(12, 25))
    x = cx - field_w // 2
    for _ in range(2):
        b.add("TextField", x, y, field_w, field_h, _text(rng))
        y += field_h + gap
    y += int(rng.integers(8, 25))
    b.add("Button", x, y, field_w, field_h, "Login")
    if rng.random() < 0.5:
        y += field_h + gap
        b.add("Text", x, y, field_w, 20, _text(rng))
    return b.gui("login")


PIN_ROWS = (("1", "2", "3"), ("4", "5", "6"), ("7", "8", "9"), (None, "0", None))


def _pin_login_gui(b: _Builder, rng: np.random.Generator, cfg: SynthConfig, cx: int) -> Gui:
    """PIN-entry login: the keypad's conventional digit layout gives targets
    an unambiguous row and column."""
    logo = int(rng.integers(48, 73))
    y = int(rng.integers(32, 57))
    b.add("Image", cx - logo // 2, y, logo, logo)
    y += logo + int(rng.integers(16, 29))
    field_w = int(rng.integers(200, 261))
    field_h = int(rng.integers(32, 45))
    b.add("TextField", cx - field_w // 2, y, field_w, field_h, "PIN")
    y += field_h + int(rng.integers(16, 29))
    key_w = int(rng.integers(56, 81))
    key_h = int(rng.integers(38, 49))
    gap = int(rng.integers(10, 17))
    x0 = cx - (3 * key_w + 2 * gap) // 2
    for row in PIN_ROWS:
        for c, digit in enumerate(row):
            x = x0 + c * (key_w + gap)
            if digit is None:
                b.add("Icon", x + (key_w - 24) // 2, y + (key_h - 24) // 2, 24, 24)
            else:
                b.add("Button", x, y, key_w, key_h, digit)
        y += key_h + gap
    y += int(rng.integers(4, 13))
    btn_w = int(rng.integers(140, 201))
    b.add("Button", cx - btn_w // 2, y, btn_w, 40, "Login")
    return b.gui("login")


def _form_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    margin = int(rng.integers(16, 33))
    label_w = int(rng.integers(80, 121))
    label_h = 20
    field_h = int(rng.integers(32, 45))
    field_x = margin + label_w + int(rng.integers(8, 17))
    field_w = cfg.canvas_w - field_x - margin
    pitch = field_h + int(rng.integers(14, 27))
    n = int(rng.integers(3, 7))
    y = int(rng.integers(40, 89))
    for _ in range(n):
        if y + field_h > cfg.canvas_h - 80:
            break
        b.add("Text", margin, y, label_w, label_h, _text(rng))
        b.add("TextField", field_x, y, field_w, field_h)
        y += pitch
    y += int(rng.integers(12, 33))
    btn_w = int(rng.integers(120, 181))
    b.add("Button", cfg.canvas_w // 2 - btn_w // 2, y, btn_w, 44, "Submit")
    return b.gui("form")


def _menu_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    bar_h = int(rng.integers(44, 65))
    b.add("Toolbar", 0, 0, cfg.canvas_w, bar_h)
    margin = int(rng.integers(16, 33))
    icon = int(rng.integers(20, 33))
    row_h = max(icon, 24)
    text_x = margin + icon + int(rng.integers(12, 21))
    text_w = int(rng.integers(140, 201))
    # keep row gaps clear of the group_gap threshold so small jitter cannot
    # flip grouping structure
    pitch = row_h + int(rng.integers(16, 27))
    n = int(rng.integers(4, 8))
    y = bar_h + int(rng.integers(20, 41))
    for _ in range(n):
        if y + row_h > cfg.canvas_h - 8:
            break
        b.add("Icon", margin, y, icon, icon)
        b.add("Text", text_x, y, text_w, row_h, _text(rng))
        y += pitch
    return b.gui("menu")


def _settings_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    margin = int(rng.integers(16, 33))
    text_w = int(rng.integers(140, 201))
    row_h = int(rng.integers(24, 37))
    sw_w, sw_h = 48, row_h
    sw_x = cfg.canvas_w - margin - sw_w
    pitch = row_h + int(rng.integers(16, 27))
    n = int(rng.integers(4, 8))
    y = int(rng.integers(48, 97))
    for _ in range(n):
        if y + row_h > cfg.canvas_h - 8:
            break
        b.add("Text", margin, y, text_w, row_h, _text(rng))
        b.add("Switch", sw_x, y, sw_w, sw_h)
        y += pitch
    return b.gui("settings")


def _profile_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    avatar = int(rng.integers(80, 129))
    cx = cfg.canvas_w // 2
    y = int(rng.integers(40, 81))
    b.add("Image", cx - avatar // 2, y, avatar, avatar)
    y += avatar + int(rng.integers(12, 25))
    name_w = int(rng.integers(120, 181))
    b.add("Text", cx - name_w // 2, y, name_w, 24, _text(rng))
    y += 24 + int(rng.integers(20, 41))
    stat_w = int(rng.integers(64, 89))
    gap = int(rng.integers(12, 25))
    total = 3 * stat_w + 2 * gap
    x0 = cx - total // 2
    for k in range(3):
        b.add("Text", x0 + k * (stat_w + gap), y, stat_w, 40, _text(rng))
    y += 40 + int(rng.integers(24, 49))
    btn_w = int(rng.integers(140, 201))
    b.add("Button", cx - btn_w // 2, y, btn_w, 44, _text(rng))
    return b.gui("profile")


def _tutorial_gui(rng: np.random.Generator, cfg: SynthConfig) -> Gui:
    b = _Builder(cfg)
    margin = int(rng.integers(20, 41))
    img_h = int(rng.integers(200, 281))
    w = cfg.canvas_w - 2 * margin
    y = int(rng.integers(32, 65))
    b.add("Image", margin, y, w, img_h)
    y += img_h + int(rng.integers(16, 33))
    b.add("Text", margin, y, w, 28, _text(rng))
    y += 28 + int(rng.integers(8, 17))
    b.add("Text", margin, y, w, int(rng.integers(48, 81)), _text(rng))
    dot = 10
    gap = 8
    n_dots = 3
    total = n_dots * dot + (n_dots - 1) * gap
    dy = cfg.canvas_h - int(rng.integers(100, 141))
    x0 = cfg.canvas_w // 2 - total // 2
    for k in range(n_dots):
        b.add("Icon", x0 + k * (dot + gap), dy, dot, dot)
    btn_w = int(rng.integers(120, 181))
    b.add("Button", cfg.canvas_w // 2 - btn_w // 2, dy + dot + 16, btn_w, 44, "Next")
    return b.gui("tutorial")


_TEMPLATES = {
    "form": _form_gui,
    "gallery": _gallery_gui,
    "list": _list_gui,
    "login": _login_gui,
    "menu": _menu_gui,
    "profile": _profile_gui,
    "settings": _settings_gui,
    "tutorial": _tutorial_gui,
}


def gen_synthetic(seed: int, count: int, config: SynthConfig = SynthConfig()) -> list[Gui]:
    """Deterministic corpus cycling through the eight templates."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        topic = TOPICS[i % len(TOPICS)]
        out.append(_TEMPLATES[topic](rng, config))
    return out


def jitter_gui(gui: Gui, rng: np.random.Generator, max_jitter: int = 2) -> Gui:
    """Perturb every placed box by at most max_jitter pixels per coordinate."""
    els = []
    for e in gui.elements:
        if e.bbox is None:
            els.append(e)
            continue
        dx, dy = int(rng.integers(-max_jitter, max_jitter + 1)), int(rng.integers(-max_jitter, max_jitter + 1))
        x = min(max(e.bbox.x + dx, 0), gui.canvas_w - e.bbox.w)
        y = min(max(e.bbox.y + dy, 0), gui.canvas_h - e.bbox.h)
        els.append(Element(e.id, e.kind, BBox(x, y, e.bbox.w, e.bbox.h), e.text, e.appearance))
    return Gui(gui.canvas_w, gui.canvas_h, tuple(els), gui.topic)
