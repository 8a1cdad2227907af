"""Writes superstore.csv and cars.csv. Seeded; rerunning gives identical files."""

import csv
import datetime as dt
import random
from pathlib import Path

HERE = Path(__file__).parent

CITIES = [
    ("United States", "New York City"), ("United States", "Los Angeles"), ("United States", "Seattle"),
    ("United States", "Chicago"), ("United States", "Houston"), ("United States", "Philadelphia"),
    ("United States", "San Francisco"), ("United States", "Columbus"), ("United States", "Denver"),
    ("United States", "Atlanta"), ("United States", "Boston"), ("United States", "Phoenix"),
    ("Canada", "Toronto"), ("Canada", "Vancouver"), ("Canada", "Montreal"), ("Canada", "Calgary"),
    ("Mexico", "Mexico City"), ("Mexico", "Guadalajara"), ("Mexico", "Monterrey"), ("Mexico", "Puebla"),
]
SUB_CATEGORIES = {
    "Furniture": ["Bookcases", "Chairs", "Furnishings", "Tables"],
    "Office Supplies": ["Appliances", "Art", "Binders", "Envelopes", "Fasteners", "Labels", "Paper", "Storage", "Supplies"],
    "Technology": ["Accessories", "Copiers", "Machines", "Phones"],
}
SEGMENTS = ["Consumer", "Corporate", "Home Office"]
STATUSES = ["Shipped Early", "Shipped On Time", "Shipped Late", "Cancelled"]
PRICE = {"Furniture": 180.0, "Office Supplies": 35.0, "Technology": 260.0}


def order_dates(rng):
    dates = []
    for month in range(1, 11):
        for _ in range(12):
            dates.append(dt.date(2017, month, rng.randint(1, 28)))
    for day in (1, 2, 3):
        dates.extend([dt.date(2017, 11, day)] * 12)
    for _ in range(10):
        dates.append(dt.date(2017, 11, rng.randint(4, 30)))
    for day in range(1, 31):
        dates.extend([dt.date(2017, 12, day)] * (6 if day in (1, 5) else 4))
    return sorted(dates)


def superstore():
    rng = random.Random(2017)
    rows = []
    for i, date in enumerate(order_dates(rng)):
        country, city = CITIES[i % len(CITIES)] if date.month == 11 and date.day <= 3 else rng.choice(CITIES)
        category = rng.choice(list(SUB_CATEGORIES))
        sub = rng.choice(SUB_CATEGORIES[category])
        quantity = rng.randint(1, 14)
        unit = PRICE[category] * rng.uniform(0.4, 1.6)
        sales = round(unit * quantity, 2)
        forecast = round(sales * rng.uniform(0.8, 1.25), 2)
        profit = round(sales * rng.uniform(-0.25, 0.4), 2)
        rows.append([
            f"{date.month}/{date.day}/{date.year}", rng.randint(0, 7),
            STATUSES[i % 4] if date.month == 12 and date.day in (1, 5) else rng.choice(STATUSES),
            rng.choice(SEGMENTS), country, city, category, sub, quantity, sales, forecast, profit,
        ])
    header = ["order date", "days to ship", "ship status", "segment", "country", "city", "category",
              "sub-category", "quantity", "sales", "sales forecast", "profit"]
    write("superstore.csv", header, rows)


def cars():
    rng = random.Random(1985)
    makes = ["alfa-romero", "audi", "bmw", "chevrolet", "dodge", "honda", "isuzu", "jaguar", "mazda",
             "mercedes-benz", "mitsubishi", "nissan", "peugeot", "plymouth", "porsche", "saab", "subaru",
             "toyota", "volkswagen", "volvo"]
    bodies = ["sedan", "hatchback", "wagon", "convertible", "hardtop"]
    rows = []
    for make in makes:
        for model in rng.sample(["giulia", "100ls", "x3", "impala", "colt", "civic", "mu-x", "xk", "rx-7",
                                 "e-class", "mirage", "sentra", "504", "fury", "911", "9000", "dl",
                                 "corolla", "golf", "244dl"], 2):
            horsepower = rng.randint(48, 262)
            price = round(5000 + horsepower * rng.uniform(90, 160), 2)
            rows.append([f"{make} {model}", rng.choice(bodies), rng.choice(["two", "four"]), horsepower,
                         round(rng.uniform(86.6, 120.9), 1), price])
    write("cars.csv", ["name", "carbody", "doornumber", "horsepower", "wheel base", "price"], rows)


def write(name, header, rows):
    with open(HERE / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


if __name__ == "__main__":
    superstore()
    cars()
