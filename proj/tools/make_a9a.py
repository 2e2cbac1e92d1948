#!/usr/bin/env python3
"""Rebuild the a9a training set (libsvm format) from the UCI Adult training file.

a9a is the Adult census data with every attribute one-hot encoded into 123
binary features: continuous attributes are cut into 5 equal-frequency bins
(capital gain/loss into zero / nonzero), categorical attributes use the value
order listed in adult.names, and missing values ("?") set no feature.

Usage: make_a9a.py adult.data > data/a9a
"""
import bisect
import csv
import sys

CATEGORIES = {
    1: "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, State-gov, Without-pay, Never-worked",
    3: "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, Assoc-voc, 9th, 7th-8th, 12th, Masters, "
       "1st-4th, 10th, Doctorate, 5th-6th, Preschool",
    5: "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, Married-spouse-absent, Married-AF-spouse",
    6: "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, Prof-specialty, Handlers-cleaners, "
       "Machine-op-inspct, Adm-clerical, Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, Armed-Forces",
    7: "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried",
    8: "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black",
    9: "Female, Male",
    13: "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, Outlying-US(Guam-USVI-etc), India, Japan, "
        "Greece, South, China, Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, Mexico, Portugal, "
        "Ireland, France, Dominican-Republic, Laos, Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, "
        "Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, Peru, Hong, Holand-Netherlands",
}
QUINTILE = {0, 2, 4, 12}
ZERO_NONZERO = {10, 11}


def quintile_cuts(values):
    ordered = sorted(values)
    distinct = sorted(set(values))
    cuts = []
    for q in (0.2, 0.4, 0.6, 0.8):
        pos = q * (len(ordered) - 1)
        lo = int(pos)
        hi = min(lo + 1, len(ordered) - 1)
        cut = ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)
        if cuts and cut <= cuts[-1]:
            # tied quantiles: move to the next distinct value so all 5 bins exist
            cut = distinct[bisect.bisect_right(distinct, cuts[-1])]
        cuts.append(cut)
    return cuts


def main():
    rows = [r for r in csv.reader(open(sys.argv[1]), skipinitialspace=True) if len(r) == 15]
    cuts = {c: quintile_cuts([float(r[c]) for r in rows]) for c in QUINTILE}
    widths = {c: 5 for c in QUINTILE}
    widths.update({c: 2 for c in ZERO_NONZERO})
    widths.update({c: len(v.split(", ")) for c, v in CATEGORIES.items()})
    offsets, base = {}, 1
    for c in range(14):
        offsets[c] = base
        base += widths[c]
    assert base - 1 == 123
    out = sys.stdout
    for r in rows:
        label = "+1" if r[14].startswith(">50K") else "-1"
        idx = []
        for c in range(14):
            v = r[c]
            if v == "?":
                continue
            if c in QUINTILE:
                k = bisect.bisect_right(cuts[c], float(v))
            elif c in ZERO_NONZERO:
                k = 0 if float(v) == 0 else 1
            else:
                k = CATEGORIES[c].split(", ").index(v)
            idx.append(offsets[c] + k)
        out.write(label + " " + " ".join(f"{i}:1" for i in idx) + "\n")


if __name__ == "__main__":
    main()
