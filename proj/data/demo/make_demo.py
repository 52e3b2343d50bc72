#!/usr/bin/env python3
"""Regenerates the demo fixtures in this directory.

Everything here is synthetic: the abstracts are invented and the PMIDs sit in
a range (900000xx) that is not used for real records. The scripted LLM turns
are written so that `pmreasoner bench` over demo.jsonl runs offline and
deterministically in every mode.
"""

import json
from pathlib import Path

HERE = Path(__file__).resolve().parent

DOCS = [
    # pmid, year, title, abstract, mesh
    ("90000101", 2004, "Montelukast and exacerbation rates in school-age children with asthma",
     "In a randomized trial of 420 children with persistent asthma, montelukast lowered the rate of "
     "exacerbations requiring oral corticosteroids compared with placebo over 48 weeks.",
     ["Asthma", "Leukotriene Antagonists", "Child", "Acetates"]),
    ("90000102", 2007, "Leukotriene receptor antagonists as add-on therapy in pediatric asthma",
     "Add-on leukotriene receptor antagonist therapy reduced exacerbations in children whose asthma "
     "was not controlled on low-dose inhaled corticosteroids.",
     ["Asthma", "Leukotriene Antagonists", "Child", "Adrenal Cortex Hormones"]),
    ("90000103", 2009, "Seasonal use of montelukast during viral season in children",
     "Short seasonal courses of montelukast were associated with fewer unscheduled visits for asthma "
     "during the autumn viral season in children aged 2 to 14.",
     ["Asthma", "Leukotriene Antagonists", "Child", "Seasons"]),
    ("90000104", 2011, "Adherence to controller therapy in childhood asthma",
     "Adherence to oral leukotriene antagonists exceeded adherence to inhaled corticosteroids, but "
     "exacerbation outcomes were not compared between groups.",
     ["Asthma", "Leukotriene Antagonists", "Child", "Medication Adherence"]),
    ("90000105", 2013, "Neuropsychiatric events reported with montelukast in children",
     "Pharmacovigilance data describe sleep disturbance and agitation in a minority of children "
     "treated with leukotriene antagonists for asthma.",
     ["Asthma", "Leukotriene Antagonists", "Child", "Drug-Related Side Effects and Adverse Reactions"]),
    ("90000106", 2015, "Leukotriene antagonists in adults with exercise-induced bronchoconstriction",
     "In adults, leukotriene antagonists attenuated the fall in FEV1 after exercise challenge.",
     ["Asthma, Exercise-Induced", "Leukotriene Antagonists", "Adult"]),
    ("90000201", 2005, "Vitamin C supplementation and incidence of the common cold in adults",
     "Regular vitamin C supplementation did not reduce the incidence of colds in the general adult "
     "population, though duration was modestly shorter.",
     ["Common Cold", "Ascorbic Acid", "Dietary Supplements", "Adult"]),
    ("90000202", 2008, "Ascorbic acid prophylaxis in community-dwelling adults",
     "Across 11 community trials, prophylactic ascorbic acid showed no effect on the number of cold "
     "episodes.",
     ["Common Cold", "Ascorbic Acid", "Dietary Supplements"]),
    ("90000203", 2010, "Vitamin C in marathon runners exposed to heavy physical stress",
     "In marathon runners, vitamin C halved cold incidence, a subgroup effect not seen in sedentary "
     "participants.",
     ["Common Cold", "Ascorbic Acid", "Running"]),
    ("90000204", 2012, "Zinc lozenges and cold duration",
     "Zinc acetate lozenges shortened cold duration; vitamin C arms were not included.",
     ["Common Cold", "Zinc"]),
    ("90000301", 2002, "Melatonin for prevention of jet lag after eastward flights",
     "Melatonin taken close to target bedtime at the destination reduced jet lag symptoms after "
     "flights crossing five or more time zones.",
     ["Jet Lag Syndrome", "Melatonin", "Travel"]),
    ("90000302", 2006, "Dose comparison of melatonin for jet lag",
     "Doses of 0.5 mg and 5 mg melatonin were similarly effective for jet lag, with faster sleep "
     "onset at the higher dose.",
     ["Jet Lag Syndrome", "Melatonin", "Dose-Response Relationship, Drug"]),
    ("90000303", 2009, "Light exposure schedules and circadian adjustment in travellers",
     "Timed light exposure advanced circadian phase in travellers; melatonin was not studied.",
     ["Jet Lag Syndrome", "Light", "Circadian Rhythm"]),
    ("90000304", 2014, "Melatonin in airline cabin crew",
     "In cabin crew on repeated transmeridian rosters, melatonin improved self-rated sleep quality "
     "but not daytime alertness.",
     ["Jet Lag Syndrome", "Melatonin", "Occupational Health"]),
    ("90000305", 2016, "Melatonin and sleep after westward travel",
     "After westward flights melatonin had little measurable benefit on jet lag ratings.",
     ["Jet Lag Syndrome", "Melatonin", "Sleep"]),
    ("90000306", 2018, "Sleep hygiene advice for international travellers",
     "Survey of travel clinics describing advice on melatonin, caffeine and naps for jet lag.",
     ["Jet Lag Syndrome", "Melatonin", "Travel Medicine"]),
    ("90000307", 2020, "Combined melatonin and light for jet lag",
     "Combining melatonin with scheduled light produced the largest reduction in jet lag scores.",
     ["Jet Lag Syndrome", "Melatonin", "Light"]),
]

QUESTIONS = [
    {
        "id": "d1",
        "question": "Do leukotriene receptor antagonists reduce asthma exacerbations in children?",
        "label": "yes",
        "gold_mesh": ["Asthma", "Leukotriene Antagonists", "Child"],
        "terms": ["Asthma", "Leukotriene Antagonists"],
        "q0": "Asthma[mesh] AND Leukotriene Antagonists[mesh] AND exacerbation",
        "q1": "Asthma[mesh] AND Leukotriene Antagonists[mesh] AND Child[mesh]",
        "keep": ["90000101", "90000102", "90000103", "90000104", "90000105"],
        "aligned": [["90000101", "90000102", "90000103"]],
        "answer": "yes",
        "rationale": "Trials in children report fewer exacerbations with leukotriene receptor antagonists "
                     "[PMID: 90000101] [PMID: 90000102], including seasonal use [PMID: 90000103].",
        "rag_query": "Asthma[mesh] AND Leukotriene Antagonists[mesh]",
        "rag_answer": "yes",
    },
    {
        "id": "d2",
        "question": "Does routine vitamin C supplementation prevent the common cold in the general population?",
        "label": "no",
        "gold_mesh": ["Common Cold", "Ascorbic Acid", "Dietary Supplements"],
        "terms": ["Common Cold", "Ascorbic Acid"],
        "q0": "Common Cold[mesh] AND Ascorbic Acid[mesh]",
        "q1": "Common Cold[mesh] AND Ascorbic Acid[mesh] AND Dietary Supplements[mesh]",
        "keep": ["90000201", "90000202"],
        "aligned": [["90000201", "90000202"]],
        "answer": "no",
        "rationale": "Supplementation did not lower cold incidence in general adult populations "
                     "[PMID: 90000201] [PMID: 90000202].",
        "rag_query": "Common Cold[mesh] AND Ascorbic Acid[mesh]",
        "rag_answer": "maybe",
    },
    {
        "id": "d3",
        "question": "Is melatonin effective for reducing jet lag after long-haul flights?",
        "label": "yes",
        "gold_mesh": ["Jet Lag Syndrome", "Melatonin"],
        "terms": ["Jet Lag Syndrome", "Melatonin"],
        "q0": "Jet Lag Syndrome[mesh] AND Melatonin[mesh]",
        "q1": "Jet Lag Syndrome[mesh] AND Melatonin[mesh]",
        "keep": ["90000301", "90000302", "90000304", "90000305", "90000306", "90000307"],
        "aligned": [["90000301"], ["90000307"]],
        "answer": "yes",
        "rationale": "Melatonin reduced jet lag after eastward flights [PMID: 90000301], most clearly when "
                     "combined with light [PMID: 90000307].",
        "rag_query": "Jet Lag Syndrome[mesh] AND Melatonin[mesh]",
        "rag_answer": "yes",
    },
]


def matches(doc, query):
    _, _, title, abstract, mesh = doc
    for clause in query.split(" AND "):
        if clause.endswith("[mesh]"):
            if clause[:-6].lower() not in (m.lower() for m in mesh):
                return False
        elif clause.lower() not in (title + " " + abstract).lower() and \
                not any(clause.lower() in m.lower() for m in mesh):
            return False
    return True


def results(query):
    return sorted((d[0] for d in DOCS if matches(d, query)), key=lambda p: (len(p), p))[:20]


def turn(session, schema_id, reply, tin, tout):
    return {"session": session, "schema_id": schema_id, "reply": reply,
            "input_tokens": tin, "output_tokens": tout}


def terms(names):
    return [{"term": n, "rationale": "core concept of the question"} for n in names]


def feedback(saturated):
    fb = {"coverage": 1, "coverage_suggestion": "", "alignment": 1, "alignment_suggestion": "",
          "redundancy": 1, "redundancy_suggestion": ""}
    if not saturated:
        fb["alignment"] = 0
        fb["alignment_suggestion"] = "Restrict to the population named in the question."
    return {"feedback": fb}


def reasoner_turns(q):
    s = q["id"]
    assert results(q["q0"]) and results(q["q1"]), s
    out = [
        turn(s, "mesh_candidates", {"terms": terms(q["terms"] + ["Humans"])}, 610, 140),
        turn(s, "mesh_selection", {"selected": q["terms"]}, 720, 60),
        turn(s, "query", {"query": q["q0"], "rationale": "Combine the selected descriptors."}, 830, 70),
    ]
    refined = [q["q1"], q["q1"]]
    for i, saturated in enumerate([q["q0"] == q["q1"], True]):
        pool = q["terms"] + (["Child"] if "Child[mesh]" in q["q1"] else []) + \
            (["Dietary Supplements"] if "Dietary Supplements" in q["q1"] else [])
        out += [
            turn(s, "critique", feedback(saturated), 1450, 190),
            turn(s, "mesh_update", {"terms": terms(pool), "changes": []}, 980, 120),
            turn(s, "refined_query", {"query": refined[i], "rationale": "Apply the critique."}, 1120, 80),
        ]
        if saturated:
            break
    screened = results(q["q1"])
    out.append(turn(s, "filter", {"verdicts": [
        {"pmid": p, "keep": "Yes" if p in q["keep"] else "No", "rationale": "topical" if p in q["keep"] else "off-topic"}
        for p in screened]}, 2400 + 90 * len(screened), 35 * len(screened)))
    kept = [p for p in screened if p in q["keep"]]
    pool = []
    for b, start in enumerate(range(0, len(kept), 5)):
        batch = kept[start:start + 5]
        aligned = set(q["aligned"][b]) if b < len(q["aligned"]) else set()
        out.append(turn(s, "extract", {"items": [
            {"pmid": p, "passage": next(d[3] for d in DOCS if d[0] == p) if p in aligned else "",
             "aligned": "Yes" if p in aligned else "No", "rationale": "reports the outcome" if p in aligned else "indirect"}
            for p in batch]}, 1900 + 260 * len(batch), 90 * len(batch)))
        pool += sorted(aligned)
        sufficient = b == len(q["aligned"]) - 1
        out.append(turn(s, "reflection", {"is_sufficient": sufficient,
                                          "rationale": "The pool answers the question." if sufficient else "Need more direct evidence.",
                                          "needed_pmids": []}, 1300, 70))
        if sufficient:
            break
    cites = " ".join(f"[PMID: {p}]" for p in pool)
    out.append(turn(s, "summary", {"verified_sources": f"Verified findings: {cites}."}, 1700, 220))
    out.append(turn(s, "answer", {"answer": q["answer"], "rationale": q["rationale"]}, 900, 130))
    return out


def llm_only_turns(q):
    return [turn(q["id"], "answer", {"answer": q["label"] if q["id"] != "d2" else "maybe",
                                     "rationale": "Based on general clinical knowledge."}, 540, 140)]


def rag_turns(q):
    s = q["id"]
    top = results(q["rag_query"])[:3]
    assert top, s
    cites = " ".join(f"[PMID: {p}]" for p in top)
    return [
        turn(s, "query", {"query": q["rag_query"], "rationale": "Direct translation."}, 700, 60),
        turn(s, "summary", {"verified_sources": f"Retrieved studies: {cites}."}, 1900, 210),
        turn(s, "answer", {"answer": q["rag_answer"], "rationale": f"See {top[0]} [PMID: {top[0]}]."}, 900, 110),
    ]


def judge_turns():
    # Pairs are judged in id order; d2 is excluded because one run missed the label.
    out = []
    for s, (a, b, verdict) in {"d1": (3, 5, "B"), "d3": (4, 4, "tie")}.items():
        side = lambda score: {d: {"score": score, "justification": "."} for d in
                              ["Reasoning Soundness", "Evidence Grounding", "Clinical Relevance", "Trustworthiness"]}
        out.append(turn(s, "judge", {"Answer A": side(a), "Answer B": side(b), "verdict": verdict}, 1500, 300))
    return out


def write_jsonl(name, rows):
    with open(HERE / name, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


def main():
    write_jsonl("corpus.jsonl", [{"pmid": p, "pub_date": str(y), "title": t, "abstract": a, "mesh": m}
                                 for p, y, t, a, m in DOCS])
    write_jsonl("demo.jsonl", [{"id": q["id"], "question": q["question"], "label": q["label"],
                                "gold_mesh": q["gold_mesh"]} for q in QUESTIONS])
    write_jsonl("script_reasoner.jsonl", [t for q in QUESTIONS for t in reasoner_turns(q)])
    write_jsonl("script_llm_only.jsonl", [t for q in QUESTIONS for t in llm_only_turns(q)])
    write_jsonl("script_rag.jsonl", [t for q in QUESTIONS for t in rag_turns(q)])
    write_jsonl("script_judge.jsonl", judge_turns())


if __name__ == "__main__":
    main()
