"""Regenerates desk_corpus.jsonl: 200 short synthetic food-blog posts."""
import json
import random
from pathlib import Path

TOPICS = {
    "barbecue": ["smoky", "ribs", "brisket", "charcoal", "grill", "sauce", "pitmaster", "smoker", "pulled", "pork", "rub", "bark"],
    "baking": ["flour", "butter", "oven", "dough", "cookies", "sourdough", "yeast", "crust", "knead", "pastry", "loaf", "sugar"],
    "family": ["grandmother", "childhood", "holiday", "kitchen", "memories", "tradition", "mother", "sunday", "table", "heirloom", "cousins", "gathering"],
    "health": ["vegan", "protein", "salad", "nutrition", "calories", "fiber", "greens", "quinoa", "balanced", "vitamins", "lentils", "wholesome"],
    "seafood": ["salmon", "shrimp", "oysters", "lobster", "coastal", "fillet", "crab", "mussels", "harbor", "scallops", "briny", "tide"],
}
FILLER = ["the", "a", "and", "of", "to", "with", "in", "for", "this", "was", "is", "it", "we", "our", "my", "on", "really", "just", "very"]
VERBS = ["tried", "made", "loved", "cooked", "shared", "tasted", "served", "prepared", "enjoyed", "remember"]


def sentence(rng, words):
    n = rng.randint(6, 14)
    out = []
    for _ in range(n):
        r = rng.random()
        if r < 0.45:
            out.append(rng.choice(FILLER))
        elif r < 0.6:
            out.append(rng.choice(VERBS))
        else:
            out.append(rng.choice(words))
    text = " ".join(out)
    return text[0].upper() + text[1:] + rng.choice([".", ".", ".", "!", "?"])


def main():
    rng = random.Random(20240501)
    names = sorted(TOPICS)
    lines = []
    for i in range(200):
        primary = names[i % len(names)]
        secondary = rng.choice(names)
        words = TOPICS[primary] * 3 + TOPICS[secondary]
        body = " ".join(sentence(rng, words) for _ in range(rng.randint(3, 9)))
        if i % 37 == 0:
            body += " Café crème brûlée, naïve délice — “quoted” text."
        title = f"{primary.title()} notes #{i:03d}"
        lines.append(json.dumps({"id": f"desk-{i:03d}", "title": title, "body": body}, ensure_ascii=False))
    out = Path(__file__).with_name("desk_corpus.jsonl")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
