"""Reference list of the benchmark datasets. Nothing is downloaded or vendored."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    source: str
    url: str
    task: str  # binary | multiclass | regression
    target: str
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


_ENTRIES = [
    DatasetEntry("abalone", "OpenML",
                 "https://www.openml.org/search?type=data&sort=runs&id=183&status=active",
                 "multiclass", "Class_number_of_rings"),
    DatasetEntry("adult", "Kohavi (1996)", "https://archive.ics.uci.edu/dataset/2/adult",
                 "binary", "income", "cited by reference only; UCI hosts the same table"),
    DatasetEntry("Bean", "UCI", "https://archive.ics.uci.edu/dataset/602/dry+bean+dataset",
                 "multiclass", "Class"),
    DatasetEntry("Churn-Modelling", "Kaggle",
                 "https://www.kaggle.com/datasets/shrutimechlearn/churn-modelling",
                 "binary", "Exited"),
    DatasetEntry("faults", "UCI", "https://archive.ics.uci.edu/dataset/198/steel+plates+faults",
                 "multiclass", "Class",
                 "the seven fault indicator columns collapsed into one label"),
    DatasetEntry("HTRU", "UCI", "https://archive.ics.uci.edu/dataset/372/htru2",
                 "binary", "class", "source file has no header row"),
    DatasetEntry("indian liver patient", "Kaggle",
                 "https://www.kaggle.com/datasets/uciml/indian-liver-patient-records?resource=download",
                 "binary", "Dataset"),
    DatasetEntry("insurance", "Kaggle", "https://www.kaggle.com/datasets/mirichoi0218/insurance",
                 "regression", "charges"),
    DatasetEntry("Magic", "Kaggle",
                 "https://www.kaggle.com/datasets/abhinand05/magic-gamma-telescope-dataset?resource=download",
                 "binary", "class"),
    DatasetEntry("News", "UCI", "https://archive.ics.uci.edu/dataset/332/online+news+popularity",
                 "regression", "shares"),
    DatasetEntry("nursery", "Kaggle", "https://www.kaggle.com/datasets/heitornunes/nursery",
                 "multiclass", "final evaluation"),
    DatasetEntry("Obesity", "Kaggle",
                 "https://www.kaggle.com/datasets/tathagatbanerjee/obesity-dataset-uci-ml",
                 "multiclass", "NObeyesdad"),
    DatasetEntry("Shoppers", "Kaggle",
                 "https://www.kaggle.com/datasets/henrysue/online-shoppers-intention",
                 "binary", "Revenue"),
    DatasetEntry("Titanic", "Kaggle", "https://www.kaggle.com/c/titanic/data",
                 "multiclass", "Survived",
                 "listed as multi-class in the benchmark although Survived has two labels"),
    DatasetEntry("wilt", "OpenML",
                 "https://www.openml.org/search?type=data&sort=runs&id=40983&status=active",
                 "binary", "class"),
]

MANIFEST: tuple[DatasetEntry, ...] = tuple(sorted(_ENTRIES, key=lambda e: (e.name.lower(), e.name)))


def manifest() -> list[dict]:
    return [e.to_dict() for e in MANIFEST]


def lookup(name: str) -> DatasetEntry:
    for e in MANIFEST:
        if e.name.lower() == name.lower():
            return e
    raise KeyError(f"unknown dataset {name!r}")
