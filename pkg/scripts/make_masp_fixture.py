"""Generate the mini-MASP source data (fixtures/masp/data_a.olog, data_b.olog).

Source A holds five hole sections with six zones of interest each. Source B
holds one hole section (section 3) computed independently from the same
physical inputs, so six step-1 rows and one MASP row overlap with A.
Only input cells are written; computed columns come from the schema equations.
Section 5 has no frac gradient at the deepest shoe.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from fractions import Fraction as F
from pathlib import Path

from ologmerge.eqlogic import quote_ident, show_number

C = F("0.052")
SECTIONS = range(1, 6)
ZONES = range(1, 7)
OVERLAP_SECTION = 3
MISSING_FG_SECTION = 5


@dataclass
class Writer:
    name: str
    schema: str
    gens: dict[str, list[str]] = field(default_factory=dict)
    eqs: list[str] = field(default_factory=list)

    def gen(self, g: str, entity: str) -> str:
        self.gens.setdefault(entity, []).append(g)
        return g

    def set(self, row: str, col: str, value) -> None:
        if isinstance(value, F):
            v = show_number(value)
        elif isinstance(value, str) and value.startswith("@"):
            v = value[1:]
        else:
            v = "'" + value + "'"
        self.eqs.append(f"{row}.{quote_ident(col)} = {v}")

    def link(self, row: str, fk: str, target: str) -> None:
        self.set(row, fk, "@" + target)

    def render(self) -> str:
        lines = [f"instance {self.name} : {self.schema} = {{", "  generators"]
        for entity, gs in self.gens.items():
            lines.append(f"    {' '.join(gs)} : {quote_ident(entity)}")
        lines.append("  equations")
        lines += [f"    {e}" for e in self.eqs]
        lines.append("}")
        return "\n".join(lines) + "\n"


def section(k: int) -> dict:
    shoe = F(7000 + 2000 * k)
    s = {
        "shoe": shoe,
        "td": shoe + 1500,
        "dmw": F("9.0") + F("0.4") * k,
        "pp_oh": F("8.8") + F("0.35") * k,
        "fg_shoe": None if k == MISSING_FG_SECTION else F("11.5") + F("0.45") * k,
        "burst": F(5000 + 1250 * k + 135 * (k % 2)),
        "mud_ratio": F("0.55") + F("0.05") * k,
        "gas_grad": F("0.1"),
        "zones": [(shoe - 1400 + 230 * j, F("8.5") + F("0.1") * j + F("0.05") * k) for j in ZONES],
    }
    s["maxmw"] = s["dmw"] + F("0.3")
    s["gas_ratio"] = 1 - s["mud_ratio"]
    return s


HEADER = {"name": "Mini Well 1", "field": "Field X", "wd": F(5000), "rkbh": F(80), "wdens": F("8.6")}
RKBML = HEADER["wd"] + HEADER["rkbh"]
SW = C * HEADER["wd"] * HEADER["wdens"]


def derived(s: dict) -> dict:
    """Hand evaluation of the step-1 and step-2a formulas of source A."""
    d = {}
    d["burst70"] = [s["burst"] * F("0.7") - C * (tvd * (s["dmw"] - bpp)) for tvd, bpp in s["zones"]]
    d["mud_tvd_bhp"] = (s["td"] - RKBML) * s["mud_ratio"]
    d["gas_tvd_bhp"] = (s["td"] - RKBML) * s["gas_ratio"]
    interface = RKBML + s["gas_ratio"] * (s["td"] - RKBML)
    d["gas_tvd_shoe"] = min(s["shoe"] - RKBML, interface - RKBML)
    d["mud_tvd_shoe"] = max(F(0), s["shoe"] - d["gas_tvd_shoe"] - RKBML)
    d["mhs_shoe"] = C * d["mud_tvd_shoe"] * s["maxmw"]
    d["ghs_shoe"] = s["gas_grad"] * d["gas_tvd_shoe"]
    bhp = s["td"] * C * s["pp_oh"]
    d["masp_bhp"] = bhp - SW - s["gas_grad"] * d["gas_tvd_bhp"] - C * d["mud_tvd_bhp"] * s["maxmw"]
    if s["fg_shoe"] is not None:
        d["masp_shoe"] = s["shoe"] * C * s["fg_shoe"] - d["mhs_shoe"] - d["ghs_shoe"] - SW
    return d


def source_a(secs: dict) -> Writer:
    w = Writer("DA", "A")
    h = w.gen("h", "Header Info")
    w.set(h, "Well Name", HEADER["name"])
    w.set(h, "Field", HEADER["field"])
    w.set(h, "Water Depth", HEADER["wd"])
    w.set(h, "RKB Height", HEADER["rkbh"])
    w.set(h, "Water Density", HEADER["wdens"])

    def fgpp(g: str, tvd: F, pp: F, fg: F | None) -> str:
        w.gen(g, "FG-PP Inputs")
        w.set(g, "RKB TVD", tvd)
        w.set(g, "Pore Pressure", pp)
        if fg is not None:
            w.set(g, "Frac Gradient", fg)
        w.link(g, "Well", h)
        return g

    for k, s in secs.items():
        shoe = fgpp(f"f{k}s", s["shoe"], s["pp_oh"] - 1, s["fg_shoe"])
        td = fgpp(f"f{k}t", s["td"], s["pp_oh"], F("12.9"))
        i = w.gen(f"i{k}", "Interval Info")
        w.set(i, "Interval Name", f"Section {k}")
        w.set(i, "Downhole Mud Weight", s["dmw"])
        w.set(i, "Max Mud Weight at OH Depth (Downhole)", s["maxmw"])
        w.set(i, "Pore Pressure at OH Depth", s["pp_oh"])
        if s["fg_shoe"] is not None:
            w.set(i, "Frac Gradient at Deepest Shoe", s["fg_shoe"])
        w.link(i, "Well", h)
        w.link(i, "Planned Section Total Depth", td)
        c = w.gen(f"c{k}", "Casing Section")
        w.set(c, "Casing Name", f"Casing {k}")
        w.set(c, "Burst Rating", s["burst"])
        w.link(c, "Interval", i)
        w.link(c, "Total Vertical Depth", shoe)
        for j, (tvd, bpp) in enumerate(s["zones"], 1):
            f = fgpp(f"f{k}z{j}", tvd, bpp, bpp + F("2.5"))
            z = w.gen(f"z{k}_{j}", "Zone of Interest")
            w.set(z, "Zone", f"Zone {k}.{j}")
            w.set(z, "Backup Pore Pressure", bpp)
            w.link(z, "Casing Section", c)
            w.link(z, "RKB TVD", f)
            s1 = w.gen(f"s{k}_{j}", "MASP Calc. Step 1")
            w.set(s1, "De-Rated Percent", F("0.7"))
            w.link(s1, "Casing Section", c)
            w.link(s1, "Zone Name", z)
            w.link(s1, "Interval", i)
            w.link(s1, "RKB TVD", f)
        d = derived(s)
        a = w.gen(f"a{k}", "MASP Calc. Step 2a")
        w.set(a, "Mud Ratio", s["mud_ratio"])
        w.set(a, "Gas Ratio", s["gas_ratio"])
        w.set(a, "Gas Gradient", s["gas_grad"])
        w.set(a, "Mud Hydrostatic (Shoe)", d["mhs_shoe"])
        w.set(a, "Gas Hydrostatic (Shoe)", d["ghs_shoe"])
        w.link(a, "Well", h)
        w.link(a, "Interval", i)
        w.link(a, "TVD Deepest OH", td)
        w.link(a, "TVD Shoe", shoe)
        b = w.gen(f"b{k}", "MASP Calc. Step 2b")
        w.link(b, "Reference MASP", a)
        w.link(b, "Well", h)
        w.link(b, "Interval", i)
    return w


def source_b(s: dict) -> Writer:
    w = Writer("DB", "B")
    d = derived(s)
    wd = w.gen("w", "Well Data Key")
    w.set(wd, "Well", HEADER["name"])
    w.set(wd, "Field/Prospect", HEADER["field"])
    w.set(wd, "RKB-ML", RKBML)
    w.set(wd, "Water Depth", HEADER["wd"])
    cs = w.gen("cs", "Casing Section Key")
    w.set(cs, "Nominal Casing - Size", f"Casing {OVERLAP_SECTION}")
    w.link(cs, "Well Data Key", wd)

    def ppfp(g: str, depth: F, pp: F, fg: F) -> str:
        w.gen(g, "PPFP Key")
        w.set(g, "Depth - RKB TVD (Ft)", depth)
        w.set(g, "Pore Pressure_mid (ppg)", pp)
        w.set(g, "Salt FG (Using OBG + 1000 psi (ppg)", fg)
        return g

    for j, (tvd, bpp) in enumerate(s["zones"], 1):
        p = ppfp(f"p{j}", tvd, bpp, bpp + F("2.5"))
        ioi = w.gen(f"ioi{j}", "Item of Inteerest Key")
        w.set(ioi, "Item of Interest - Burst Rating (psi)", s["burst"])
        w.set(ioi, "Item of Interest Depth - RKB TVD (Ft)", tvd)
        w.link(ioi, "PPFP Key", p)
        w.link(ioi, "Top Casing Section / Nominal Casing - Size", cs)
        bc = w.gen(f"bc{j}", "Burst Calculation Key")
        w.set(bc, "Material Utilization Factor", F("0.7"))
        w.set(bc, "DHEMW", s["dmw"])
        w.link(bc, "Item of Interest", ioi)

    poh = ppfp("poh", s["td"], s["pp_oh"], F("12.9"))
    psh = ppfp("psh", s["shoe"], s["pp_oh"] - 1, s["fg_shoe"])
    oh = w.gen("oh", "OH Key")
    w.set(oh, "Max Mud Weight at OH Depth (Downhole,ppg)", s["maxmw"])
    w.set(oh, "Kick Fluid Gradient if Gas per BSEE (psi/ft)", s["gas_grad"])
    w.link(oh, "PPFP Key", poh)
    w.link(oh, "Top Casing Section / Nominal Casing - Size", cs)
    es = w.gen("es", "Exposed Shoe Key")
    w.link(es, "PPFP Key", psh)
    w.link(es, "Top Casing Section / Nominal Casing - Size", cs)
    mg = w.gen("mg", "Mud Gradient Key")
    w.set(mg, "Mud Fraction", s["mud_ratio"])
    w.set(mg, "Gas Fraction", s["gas_ratio"])
    w.link(mg, "Casing Section Key", cs)
    mo = w.gen("mo", "MASP Open Hole Key")
    w.set(mo, "Open Hole Depth yielding highest MASP- RKB TVD (Ft)", s["td"])
    w.set(mo, "Constant", C)
    w.set(mo, "Sw Hydrostatic", SW)
    w.link(mo, "OH Key", oh)
    w.link(mo, "Casing Section Key", cs)
    w.link(mo, "Mud Gradient Key", mg)
    ms = w.gen("ms", "MASP Shoe Key")
    w.set(ms, "Deepest Exposed Shoe Below This Shoe - RKB TVD (Ft)", s["shoe"])
    w.set(ms, "TVDmud", d["mud_tvd_shoe"])
    w.set(ms, "TVDHC", d["gas_tvd_shoe"])
    w.set(ms, "HC Grad.", s["gas_grad"])
    w.set(ms, "Constant", C)
    w.set(ms, "Sw Hydrostatic", SW)
    w.link(ms, "OH Key", oh)
    w.link(ms, "Exposed Shoe Key", es)
    w.link(ms, "Casing Section Key", cs)
    mk = w.gen("mk", "MASP Key")
    w.link(mk, "MASP Open Hole Key", mo)
    w.link(mk, "MASP Shoe Key", ms)
    w.link(mk, "Casing Section Key", cs)
    return w


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures" / "masp")
    args = ap.parse_args()
    secs = {k: section(k) for k in SECTIONS}
    derived_all = {k: derived(s) for k, s in secs.items()}
    burst = [v for d in derived_all.values() for v in d["burst70"]]
    assert len(set(burst)) == len(burst), "step-1 merge keys must be distinct"
    bhp = [d["masp_bhp"] for d in derived_all.values()]
    assert len(set(bhp)) == len(bhp), "step-2a merge keys must be distinct"
    header = "// Generated by scripts/make_masp_fixture.py; do not edit by hand.\n"
    (args.out / "data_a.olog").write_text(header + source_a(secs).render())
    (args.out / "data_b.olog").write_text(header + source_b(secs[OVERLAP_SECTION]).render())
    print(f"wrote data_a.olog and data_b.olog to {args.out}")


if __name__ == "__main__":
    main()
