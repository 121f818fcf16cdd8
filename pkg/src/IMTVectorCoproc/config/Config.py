import os
from loguru import logger
from IMTVectorCoproc.exceptions import ConfigError


def _int(text):
    return int(text, 0)


def _int_list(text):
    return [int(v, 0) for v in text.replace(",", " ").split()]


KEYS = dict(
    scheme=str,
    d=_int,
    f=_int,
    m=_int,
    n=_int,
    spm_capacity=_int,
    initial_latency=_int,
    load_latency=_int,
    seed=_int,
    workload=str,
    kernel=str,
    sizes=_int_list,
    filter=_int,
    pscale=_int,
    instances=_int,
    weights=str,
    n_jobs=_int,
)


class Config:
    """
    Flat key=value run configuration. '#' starts a comment, blank lines are ignored.
    """
    def __init__(self, values=None) -> None:
        self.values = dict(values or {})

    @staticmethod
    def read_key_values(file):
        if not os.path.exists(file):
            logger.error(f"Cannot find config file: {file}")
            raise FileNotFoundError(f"Cannot find config file: {file}")
        pairs = dict()
        with open(file, "r", encoding="utf-8") as src:
            for line_number, line in enumerate(src, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ConfigError(f"{file}:{line_number}: expected key=value, got {text!r}")
                key, value = (part.strip() for part in text.split("=", 1))
                pairs[key.lower()] = value
        return pairs

    @classmethod
    def from_file(cls, file):
        values = dict()
        for key, text in cls.read_key_values(file).items():
            values[key] = cls.parse_value(key, text, file)
        logger.debug(f"Config {file}: {values}")
        return cls(values)

    @staticmethod
    def parse_value(key, text, origin="config"):
        if key not in KEYS:
            raise ConfigError(f"{origin}: unknown key {key}")
        try:
            return KEYS[key](text)
        except ValueError:
            raise ConfigError(f"{origin}: bad value for {key}: {text!r}")

    def merged(self, overrides):
        """
        :param: overrides dict of values that win over the file, None values are ignored.
        """
        return Config({**self.values, **{k: v for k, v in overrides.items() if v is not None}})

    def get(self, key, default=None):
        return self.values.get(key, default)
