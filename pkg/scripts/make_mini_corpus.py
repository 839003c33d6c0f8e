#!/usr/bin/env python3
"""Regenerate the bundled mini corpus (data/mini/corpus.jsonl).

The corpus is five short tutoring dialogs with coarse-labeled teacher turns,
sized so every fine intent occurs at least once after annotation with the
bundled mock rules.
"""

import json
from pathlib import Path

DIALOGS = [
    {
        "id": "d1",
        "question": (
            "A bakery made 8 pies for a party of 24 guests. How many guests "
            "share each pie if every pie is shared equally?"
        ),
        "gold_solution": "24 guests / 8 pies = 3 guests per pie.",
        "student_solution": "I cut each pie into 6 slices, so 48 slices for 24 guests.",
        "turns": [
            {
                "speaker": "teacher",
                "coarse_label": "Generic",
                "text": "Hi Sam, how are you doing with the word problem?",
            },
            {"speaker": "student", "text": "I tried dividing the pies but I got stuck."},
            {
                "speaker": "teacher",
                "coarse_label": "Probing",
                "text": (
                    "I see. But we're dealing with individual pies here, rather than "
                    "slices. If you had a birthday cake, and lots of guests at your "
                    "party, you couldn't just keep producing slices of cake. Can you "
                    "think of another way to figure out how everyone gets a piece?"
                ),
            },
            {
                "speaker": "student",
                "text": "Maybe I could divide the total number of guests instead?",
            },
            {"speaker": "teacher", "coarse_label": "Generic", "text": "Good job!"},
        ],
    },
    {
        "id": "d2",
        "question": (
            "A library had 6 novels and bought 8 more, but 8 - 2 of the new ones "
            "were damaged and returned. How many new books stayed?"
        ),
        "gold_solution": "6 + (8 - (8 - 2)) = 8 books on the shelf.",
        "student_solution": "6 + 8 + 8 - 2 = 20 new books.",
        "turns": [
            {
                "speaker": "teacher",
                "coarse_label": "Generic",
                "text": "Please walk me through your solution.",
            },
            {"speaker": "student", "text": "I computed 6 + 8 + 8 - 2 = 20 new books."},
            {
                "speaker": "teacher",
                "coarse_label": "Telling",
                "text": (
                    "You need to add brackets to the 8 - 2 part, and remember the "
                    "order of operations."
                ),
            },
            {
                "speaker": "student",
                "text": (
                    "Yes, I understand now. The correct equation should be "
                    "6 + (8 + 8) - 2 = 22 new books."
                ),
            },
            {
                "speaker": "teacher",
                "coarse_label": "Telling",
                "text": "No, I said it's 8 - 2, not 8 + 8.",
            },
        ],
    },
    {
        "id": "d3",
        "question": (
            "Riley bought two packs of 10 markers and 4 loose markers, then gave "
            "one pack away. How many markers does Riley have?"
        ),
        "gold_solution": "10 + 4 = 14 markers.",
        "student_solution": "10 + 10 + 4 = 24 markers.",
        "turns": [
            {
                "speaker": "teacher",
                "coarse_label": "Generic",
                "text": "Hi Riley, how is the problem going?",
            },
            {"speaker": "student", "text": "I think the answer is 14 markers."},
            {
                "speaker": "teacher",
                "coarse_label": "Focus",
                "text": "Right, so how did you get there?",
            },
            {"speaker": "student", "text": "I added 10 + 10 + 4 = 24."},
            {"speaker": "teacher", "coarse_label": "Telling", "text": "Is that 14?"},
            {"speaker": "student", "text": "Oh wait, it should be 10 + 4 = 14."},
            {
                "speaker": "teacher",
                "coarse_label": "Generic",
                "text": "Great, is there anything else I can help with?",
            },
        ],
    },
    {
        "id": "d4",
        "question": "A square garden has sides of 5 meters. How much fence is needed?",
        "gold_solution": "4 * 5 = 20 meters of fence.",
        "student_solution": "5 + 5 = 10 meters.",
        "turns": [
            {
                "speaker": "teacher",
                "coarse_label": "Focus",
                "text": "Can you reread the question and tell me what shape the garden is?",
            },
            {
                "speaker": "student",
                "text": "It says the garden is a square with sides of 5 meters.",
            },
            {
                "speaker": "teacher",
                "coarse_label": "Probing",
                "text": "How do you calculate the perimeter of a square?",
            },
            {"speaker": "student", "text": "You add all four sides, so 20 meters."},
            {
                "speaker": "teacher",
                "coarse_label": "Telling",
                "text": "Exactly. You multiply one side by 4 to get your answer.",
            },
        ],
    },
    {
        "id": "d5",
        "question": (
            "A shop packs 12 boxes of candles and sells each box for 3 dollars. "
            "How much money does the shop make?"
        ),
        "gold_solution": "12 * 3 = 36 dollars.",
        "student_solution": "12 + 3 = 15 dollars.",
        "turns": [
            {
                "speaker": "teacher",
                "coarse_label": "Focus",
                "text": "So what should you do next?",
            },
            {"speaker": "student", "text": "I guess I should count the boxes first."},
            {
                "speaker": "teacher",
                "coarse_label": "Telling",
                "text": "Add the boxes first, then multiply by the price of each one.",
            },
            {
                "speaker": "student",
                "text": "That gives 12 boxes times 3 dollars, so 36 dollars.",
            },
            {
                "speaker": "teacher",
                "coarse_label": "Probing",
                "text": "How would things change if they had 15 boxes instead?",
            },
        ],
    },
]


def main():
    out = Path(__file__).resolve().parent.parent / "data" / "mini" / "corpus.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for dialog in DIALOGS:
            fh.write(json.dumps(dialog, ensure_ascii=False) + "\n")
    print(f"wrote {len(DIALOGS)} dialogs to {out}")


if __name__ == "__main__":
    main()
