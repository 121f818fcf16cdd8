import os
import numpy as np
from loguru import logger

"""
Memory image files: raw little-endian binaries and the textual hex format (one 32-bit word per line).
"""


class IO:
    def __init__(self) -> None:
        pass

    @staticmethod
    def read_hex_words(file):
        """
        :param: file str path of a hex image. Blank lines and '#' comments are skipped, a 0x prefix is optional.
        """
        words = []
        with open(file, "r", encoding="utf-8") as src:
            for line_number, line in enumerate(src, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                try:
                    words.append(int(text, 16))
                except ValueError:
                    raise ValueError(f"{file}:{line_number}: not a hex word: {text!r}")
        return np.array(words, dtype=np.int64).astype("<u4").astype(np.int64)

    @staticmethod
    def write_hex_words(file, words):
        try:
            with open(file, "w", encoding="utf-8", newline="\n") as dst:
                for word in np.asarray(words, dtype=np.int64).astype("<u4"):
                    dst.write(f"{int(word):08x}\n")
        except OSError as e:
            logger.error(f"Cannot write hex image: {file}")
            raise OSError(f"{file}: {e}")
        return file

    @staticmethod
    def read_raw(file):
        with open(file, "rb") as src:
            data = src.read()
        if len(data) % 4:
            data += bytes(4 - len(data) % 4)
        return data

    @staticmethod
    def write_raw(file, data):
        with open(file, "wb") as dst:
            dst.write(bytes(data))
        return file

    def load_image(self, memory, file, base):
        """
        Loads a memory image into data memory at base. Files ending in .hex are read as hex words, everything else as raw binary.
        :param: memory MainMemory target memory.
        :param: file str image path.
        :param: base int byte address of the first word.
        """
        if not os.path.exists(file):
            logger.error(f"Cannot find memory image: {file}")
            raise FileNotFoundError(f"Cannot find memory image: {file}")
        if file.endswith(".hex"):
            memory.load_words(base, self.read_hex_words(file))
        else:
            memory.write_block(base, self.read_raw(file))
        logger.debug(f"Loaded {file} at 0x{base:08x}")

    def store_image(self, memory, file, base, n_bytes):
        data = memory.read_block(base, n_bytes)
        if file.endswith(".hex"):
            return self.write_hex_words(file, np.frombuffer(data + bytes(-len(data) % 4), dtype="<u4"))
        return self.write_raw(file, data)

    def dump_scratchpads(self, coprocessor, dir_out, prefix="spm"):
        """
        Writes every scratchpad as a hex file in logical (bank-deinterleaved) word order.
        """
        files = []
        os.makedirs(dir_out, exist_ok=True)
        for (spmi, spm), words in coprocessor.dump_scratchpads().items():
            files.append(self.write_hex_words(os.path.join(dir_out, f"{prefix}_{spmi}_{spm}.hex"), words))
        return files
