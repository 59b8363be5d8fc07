# Copyright 2026 The KPA Toolkit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the bundled mini corpus and its synthetic embeddings to data/mini."""

import csv
import json
import pathlib

import numpy as np

DIM = 16
OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "mini"

TOPICS = {
    "We should ban fast food": {
        "pro": [
            ("Fast food causes obesity and heart disease", [
                "Fast food is a leading cause of obesity in children",
                "Eating fast food every week raises the risk of heart disease",
                "Obesity rates climb wherever fast food chains expand",
                "Greasy burgers clog arteries and cause heart disease",
            ]),
            ("Fast food chains exploit low wage workers", [
                "Fast food workers are paid wages too low to live on",
                "Chains exploit teenage workers with unpaid overtime",
                "Low wage jobs at burger chains trap workers in poverty",
                "Fast food companies cut worker hours to avoid benefits",
            ]),
            ("Fast food packaging pollutes the environment", [
                "Takeaway packaging fills landfills with plastic waste",
                "Fast food wrappers are the most common litter on beaches",
                "Single use cups and boxes pollute rivers and parks",
                "The packaging from one meal takes centuries to break down",
            ]),
        ],
        "con": [
            ("People have the right to choose what they eat", [
                "Adults have the right to choose their own food",
                "The state should not decide what people eat",
                "Banning a food takes away a basic personal choice",
                "Everyone should be free to eat a burger if they want",
            ]),
            ("Fast food is cheap and convenient for busy families", [
                "Busy parents rely on cheap fast food after long shifts",
                "Fast food is the most convenient meal for working families",
                "A cheap meal on the go helps families on tight budgets",
                "Convenient drive through food saves time for busy people",
            ]),
            ("A ban would destroy many jobs", [
                "Millions of people work in fast food restaurants",
                "A ban would put restaurant staff out of work overnight",
                "Closing chains would destroy jobs in small towns",
                "Many students get their first job in fast food",
            ]),
        ],
    },
    "We should subsidize public transport": {
        "pro": [
            ("Public transport reduces pollution and emissions", [
                "Buses and trains emit far less carbon per passenger",
                "Subsidized transit takes polluting cars off the road",
                "Cheaper trains cut emissions from daily commuting",
                "More people on buses means cleaner city air",
            ]),
            ("Affordable transit helps low income people reach jobs", [
                "Low income workers need affordable buses to reach jobs",
                "Cheap fares let poor families travel to work and school",
                "Transit subsidies help people without cars find jobs",
                "Affordable transport opens job opportunities across the city",
            ]),
            ("Public transport reduces traffic congestion", [
                "Full trains mean fewer cars stuck in traffic",
                "Subsidized buses reduce congestion at rush hour",
                "Every bus replaces dozens of cars on crowded roads",
                "Good transit shortens traffic jams for everyone",
            ]),
        ],
        "con": [
            ("Subsidies are a waste of taxpayer money", [
                "Transit subsidies waste taxpayer money on empty buses",
                "Taxpayers should not fund trains they never use",
                "Subsidies pour public money into inefficient operators",
                "The money would be better spent on schools and hospitals",
            ]),
            ("Rural residents gain nothing from urban transit", [
                "People in rural areas have no trains to ride",
                "Villages gain nothing from subsidized city metros",
                "Rural families still depend on their cars",
                "Urban transit subsidies ignore the countryside",
            ]),
            ("Subsidized services become inefficient", [
                "Subsidized operators have no reason to improve service",
                "State funding makes transit companies lazy and inefficient",
                "Without competition subsidized buses run late",
                "Guaranteed subsidies remove the pressure to cut costs",
            ]),
        ],
    },
}

STRAYS = {
    ("We should ban fast food", "pro"): [
        "Fast food advertising targets young children",
        "Some fast food contains dangerous additives",
        "Fast food culture erodes family dinners",
    ],
    ("We should ban fast food", "con"): [
        "A ban would be impossible to enforce",
        "Healthy options already exist at many chains",
        "Education works better than prohibition",
    ],
    ("We should subsidize public transport", "pro"): [
        "Public transport is safer than driving",
        "Transit makes cities more pleasant to live in",
        "Elderly people depend on buses to stay independent",
    ],
    ("We should subsidize public transport", "con"): [
        "Remote work is reducing the need for commuting",
        "Subsidies distort the transport market",
        "Electric cars will solve the pollution problem anyway",
    ],
}


def unit(v):
    return v / np.linalg.norm(v)


def main():
    rng = np.random.default_rng(20240601)
    OUT.mkdir(parents=True, exist_ok=True)
    args, kps, labels, vectors = [], [], [], []
    a_count = k_count = 0
    for topic, stances in TOPICS.items():
        for stance, groups in stances.items():
            directions = []
            for kp_text, members in groups:
                k_count += 1
                kp_id = f"kp{k_count:02d}"
                direction = unit(rng.normal(size=DIM))
                directions.append(direction)
                kps.append((kp_id, kp_text, topic, stance))
                vectors.append((kp_id, direction))
                for text in members:
                    a_count += 1
                    arg_id = f"a{a_count:03d}"
                    args.append((arg_id, text, topic, stance))
                    vectors.append((arg_id, unit(direction + rng.normal(scale=0.06, size=DIM))))
                    labels.append((arg_id, kp_id, 1))
            # Strays lean towards one key point by a decreasing amount, so the
            # join threshold decides whether they are absorbed.
            for text, weight in zip(STRAYS[(topic, stance)], (1.1, 0.8, 0.5)):
                a_count += 1
                arg_id = f"a{a_count:03d}"
                args.append((arg_id, text, topic, stance))
                lean = directions[rng.integers(0, len(directions))]
                vectors.append((arg_id, unit(weight * lean + unit(rng.normal(size=DIM)))))

    with open(OUT / "arguments.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["arg_id", "argument", "topic", "stance"])
        w.writerows(args)
    with open(OUT / "key_points.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["key_point_id", "key_point", "topic", "stance"])
        w.writerows(kps)
    with open(OUT / "labels.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["arg_id", "key_point_id", "label"])
        w.writerows(labels)
    with open(OUT / "embeddings.jsonl", "w") as f:
        for item_id, v in vectors:
            f.write(json.dumps({"id": item_id, "vector": [round(float(x), 6) for x in v]}) + "\n")


if __name__ == "__main__":
    main()
