"""Writes the synthetic `shop` fixture records (records.jsonl).

Products are grouped by brand; also_buy and also_view links mostly stay
within a window of nearby products so that paths and shared neighbors occur.
Run from this directory: python3 make_records.py
"""

import json
import random

N_BRANDS = 60

rng = random.Random(7)
words = (
    "Acme Northwind Lumen Vireo Kestrel Halcyon Quill Marlow Tundra Cobalt Juniper Ember Solace "
    "Orchid Granite Wren Basil Harbor Fable Lyric Sable Cinder Aster Meadow Pike"
).split()
suffixes = ["Goods", "Supply", "Works", "Labs", "Co"]
brands = [f"{words[i % len(words)]} {suffixes[i // len(words)]}" for i in range(N_BRANDS)]
# brand sizes vary so that degree counts spread out
owner = [b for b in range(N_BRANDS) for _ in range(rng.randint(1, 6))]
products = [f"B0{rng.getrandbits(32):08X}" for _ in owner]


def nearby(i, window):
    j = i
    while j == i:
        j = min(len(products) - 1, max(0, i + rng.randint(-window, window)))
    return products[j]


with open("records.jsonl", "w") as out:
    for i, pid in enumerate(products):
        rel = [["brand", brands[owner[i]]]]
        rel += [["also_buy", nearby(i, 8)] for _ in range(rng.randint(0, 2))]
        rel += [["also_view", nearby(i, 12)] for _ in range(rng.randint(0, 2))]
        out.write(json.dumps({"id": pid, "type": "product", "relations": rel}) + "\n")
    # a few products with no relations at all
    for _ in range(5):
        out.write(json.dumps({"id": f"B0{rng.getrandbits(32):08X}", "type": "product", "relations": []}) + "\n")
