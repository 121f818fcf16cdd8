import re
from dataclasses import dataclass, field
from typing import List
from loguru import logger
from IMTVectorCoproc.exceptions import AssemblyError
from IMTVectorCoproc.isa.ISA import (Instruction, InstrKind, Program, NOP, SCALAR_OPS, VECTOR_KINDS, VECTOR_SYNTAX,
                                     TRANSFER_KINDS, s32, u32)
from IMTVectorCoproc.config import CSR_NAMES, PROGRAM_ORIGIN

"""
Two-pass assembler and disassembler for the RV32IM subset plus the custom vector extension.
Dialect: one statement per line, any number of "label:" prefixes, '#' comments, .org/.word data directives.
"""

ABI_NAMES = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4, "t0": 5, "t1": 6, "t2": 7, "s0": 8, "fp": 8, "s1": 9,
    **{f"a{n}": 10 + n for n in range(8)},
    **{f"s{n}": 16 + n for n in range(2, 12)},
    **{f"t{n}": 25 + n for n in range(3, 7)},
}
PSEUDO_OPS = ("nop", "mv", "li", "j", "ret", "csrr", "csrw", "csrwi", "beqz", "bnez")
VECTOR_MNEMONICS = {kind.value: kind for kind in VECTOR_KINDS}
SHIFT_IMM_OPS = ("slli", "srli", "srai")

LABEL_RE = re.compile(r"^\s*([A-Za-z_.$][\w.$]*)\s*:(.*)$")
MEMORY_RE = re.compile(r"^(.*)\(\s*([\w$]+)\s*\)$")
IDENTIFIER_RE = re.compile(r"^[A-Za-z_.$][\w.$]*$")


@dataclass
class SourceUnit:
    lines: List[str] = field(default_factory=list)
    filename: str = "<source>"

    @classmethod
    def from_text(cls, text, filename="<source>"):
        return cls(text.splitlines(), filename)

    @classmethod
    def from_file(cls, file):
        with open(file, "r", encoding="utf-8") as src:
            return cls.from_text(src.read(), file)

    @property
    def text(self):
        return "".join(line + "\n" for line in self.lines)


@dataclass(frozen=True)
class AsmDiagnostic:
    line: int
    severity: str  # "error" or "warning"
    message: str
    filename: str = "<source>"

    def __str__(self):
        return f"{self.filename}:{self.line}: {self.severity}: {self.message}"


class _LineError(Exception):
    pass


@dataclass
class _Statement:
    line: int
    labels: List[str]
    mnemonic: str = None
    operands: List[str] = field(default_factory=list)


class Assembler:
    def __init__(self, origin=PROGRAM_ORIGIN) -> None:
        self.origin = origin
        self.diagnostics = []

    def assemble(self, src, origin=None):
        """
        :param: src SourceUnit or str assembly text.
        :param: origin int byte address of the first instruction.
        :return: Program; raises AssemblyError listing the diagnostics if any error was found.
        """
        if isinstance(src, str):
            src = SourceUnit.from_text(src)
        origin = self.origin if origin is None else origin
        self.diagnostics = []
        statements = [self._parse_line(n, line, src.filename) for n, line in enumerate(src.lines, 1)]
        labels = self._collect_labels([s for s in statements if s is not None], src.filename)
        instrs, data, written = [], [], set()
        data_address = 0
        for s in statements:
            if s is None or s.mnemonic is None:
                continue
            try:
                if s.mnemonic == ".org":
                    self._arity(s, 1)
                    data_address = self._immediate(s.operands[0], 0, (1 << 32) - 1, ".org")
                    if data_address % 4:
                        raise _LineError(f".org address 0x{data_address:x} is not word aligned")
                elif s.mnemonic == ".word":
                    if not s.operands:
                        raise _LineError(".word needs at least one value")
                    for token in s.operands:
                        if data_address in written:
                            self._report(s.line, "warning", f"data word at 0x{data_address:08x} overwritten", src.filename)
                        written.add(data_address)
                        data.append((data_address, u32(self._immediate(token, -(1 << 31), (1 << 32) - 1, ".word"))))
                        data_address += 4
                elif s.mnemonic.startswith("."):
                    raise _LineError(f"unknown directive {s.mnemonic}")
                else:
                    instrs.extend(self._expand(s, origin + 4 * len(instrs), labels, origin))
            except (_LineError, ValueError) as e:
                self._report(s.line, "error", str(e), src.filename)
        if any(d.severity == "error" for d in self.diagnostics):
            logger.debug(f"{src.filename}: {len(self.diagnostics)} diagnostics")
            raise AssemblyError(self.diagnostics)
        for d in self.diagnostics:
            logger.warning(str(d))
        return Program(instrs, labels, origin, data)

    def assemble_file(self, file, origin=None):
        return self.assemble(SourceUnit.from_file(file), origin)

    # ------------------------------------------------------------------ pass 1

    def _parse_line(self, number, line, filename):
        text = line.rstrip("\r").split("#", 1)[0].strip()
        labels = []
        while True:
            match = LABEL_RE.match(text)
            if match is None:
                break
            labels.append(match.group(1))
            text = match.group(2).strip()
        if not text:
            return _Statement(number, labels) if labels else None
        parts = text.split(None, 1)
        mnemonic = parts[0].lower()
        operands = [o.strip() for o in parts[1].split(",")] if len(parts) > 1 else []
        if any(not o for o in operands):
            self._report(number, "error", f"empty operand in {text!r}", filename)
            return _Statement(number, labels)
        return _Statement(number, labels, mnemonic, operands)

    def _collect_labels(self, statements, filename):
        labels = dict()
        index = 0
        dangling = []
        for s in statements:
            for name in s.labels:
                if name in labels or name in [d[0] for d in dangling]:
                    self._report(s.line, "error", f"duplicate label {name}", filename)
                else:
                    dangling.append((name, s.line))
            if s.mnemonic is None or s.mnemonic.startswith("."):
                continue
            for name, _ in dangling:
                labels[name] = index
            dangling = []
            index += self._size(s)
        for name, line in dangling:
            self._report(line, "error", f"label {name} is not followed by an instruction", filename)
        return labels

    def _size(self, s):
        if s.mnemonic == "li" and len(s.operands) == 2:
            try:
                return len(_li_parts(self._immediate(s.operands[1], -(1 << 31), (1 << 32) - 1, "li")))
            except _LineError:
                return 1
        return 1

    # ------------------------------------------------------------------ pass 2

    def _expand(self, s, pc, labels, origin):
        m, ops = s.mnemonic, s.operands
        if m in VECTOR_MNEMONICS:
            return [self._vector(s)]
        if m in PSEUDO_OPS:
            return self._pseudo(s, pc, labels, origin)
        kind = SCALAR_OPS.get(m)
        if kind is None:
            raise _LineError(f"unknown mnemonic {m}")
        if kind in (InstrKind.ALU_REG, InstrKind.MULDIV):
            self._arity(s, 3)
            return [Instruction(kind, self._register(ops[0]), self._register(ops[1]), self._register(ops[2]), op=m)]
        if kind is InstrKind.ALU_IMM:
            self._arity(s, 3)
            lo, hi = (0, 31) if m in SHIFT_IMM_OPS else (-2048, 2047)
            imm = self._immediate(ops[2], lo, hi, m)
            return [Instruction(kind, self._register(ops[0]), self._register(ops[1]), imm=imm, op=m)]
        if kind is InstrKind.LOAD:
            self._arity(s, 2)
            imm, base = self._memory_operand(ops[1], m)
            return [Instruction(kind, rd=self._register(ops[0]), rs1=base, imm=imm, op=m)]
        if kind is InstrKind.STORE:
            self._arity(s, 2)
            imm, base = self._memory_operand(ops[1], m)
            return [Instruction(kind, rs1=base, rs2=self._register(ops[0]), imm=imm, op=m)]
        if kind is InstrKind.BRANCH:
            self._arity(s, 3)
            return [self._branch(m, self._register(ops[0]), self._register(ops[1]), ops[2], pc, labels, origin)]
        if kind is InstrKind.JUMP:
            if len(ops) == 1:
                return [self._jal(1, ops[0], pc, labels, origin)]
            self._arity(s, 2)
            return [self._jal(self._register(ops[0]), ops[1], pc, labels, origin)]
        if kind is InstrKind.JUMP_REG:
            if len(ops) == 1:
                return [Instruction(kind, rd=1, rs1=self._register(ops[0]), op=m)]
            if len(ops) == 2:
                imm, base = self._memory_operand(ops[1], m)
                return [Instruction(kind, rd=self._register(ops[0]), rs1=base, imm=imm, op=m)]
            self._arity(s, 3)
            imm = self._immediate(ops[2], -2048, 2047, m)
            return [Instruction(kind, rd=self._register(ops[0]), rs1=self._register(ops[1]), imm=imm, op=m)]
        if kind is InstrKind.UPPER_IMM:
            self._arity(s, 2)
            return [Instruction(kind, rd=self._register(ops[0]), imm=self._immediate(ops[1], 0, 0xFFFFF, m) << 12, op=m)]
        if kind is InstrKind.CSR:
            self._arity(s, 3)
            source = self._immediate(ops[2], 0, 31, m) if m.endswith("i") else self._register(ops[2])
            return [Instruction(kind, rd=self._register(ops[0]), rs1=source, imm=self._csr(ops[1]), op=m)]
        self._arity(s, 0)
        return [Instruction(kind, op=m)]

    def _pseudo(self, s, pc, labels, origin):
        m, ops = s.mnemonic, s.operands
        if m == "nop":
            self._arity(s, 0)
            return [NOP]
        if m == "ret":
            self._arity(s, 0)
            return [Instruction(InstrKind.JUMP_REG, rd=0, rs1=1, op="jalr")]
        if m == "j":
            self._arity(s, 1)
            return [self._jal(0, ops[0], pc, labels, origin)]
        if m == "csrwi":
            self._arity(s, 2)
            return [Instruction(InstrKind.CSR, rs1=self._immediate(ops[1], 0, 31, m), imm=self._csr(ops[0]), op="csrrwi")]
        if m == "csrw":
            self._arity(s, 2)
            return [Instruction(InstrKind.CSR, rs1=self._register(ops[1]), imm=self._csr(ops[0]), op="csrrw")]
        self._arity(s, 2)
        if m == "csrr":
            return [Instruction(InstrKind.CSR, rd=self._register(ops[0]), imm=self._csr(ops[1]), op="csrrs")]
        if m in ("beqz", "bnez"):
            return [self._branch("beq" if m == "beqz" else "bne", self._register(ops[0]), 0, ops[1], pc, labels, origin)]
        rd = self._register(ops[0])
        if m == "mv":
            return [Instruction(InstrKind.ALU_IMM, rd, self._register(ops[1]), op="addi")]
        parts = _li_parts(self._immediate(ops[1], -(1 << 31), (1 << 32) - 1, m))
        if len(parts) == 1:
            return [Instruction(InstrKind.ALU_IMM, rd, 0, imm=parts[0], op="addi")]
        hi, lo = parts
        return [
            Instruction(InstrKind.UPPER_IMM, rd, imm=hi << 12, op="lui"),
            Instruction(InstrKind.ALU_IMM, rd, rd, imm=lo, op="addi"),
        ]

    def _vector(self, s):
        kind = VECTOR_MNEMONICS[s.mnemonic]
        syntax = VECTOR_SYNTAX[kind]
        self._arity(s, len(syntax))
        regs = []
        for n, (token, parenthesized) in enumerate(zip(s.operands, syntax)):
            inner, has_parens = _unwrap(token)
            if has_parens != parenthesized:
                if kind is InstrKind.KSVSLT and n == 2:
                    kind = InstrKind.KVSLT  # vector-vector row of the compare
                elif not (kind in TRANSFER_KINDS and n == 2):
                    expected = "be" if parenthesized else "not be"
                    raise _LineError(f"operand {n + 1} of {s.mnemonic} must {expected} parenthesized")
            regs.append(self._register(inner))
        regs += [0] * (3 - len(regs))
        return Instruction(kind, *regs)

    # ------------------------------------------------------------------ operands

    @staticmethod
    def _arity(s, count):
        if len(s.operands) != count:
            raise _LineError(f"{s.mnemonic} takes {count} operands, got {len(s.operands)}")

    @staticmethod
    def _register(token):
        name = token.strip().lower()
        if name in ABI_NAMES:
            return ABI_NAMES[name]
        if re.fullmatch(r"x\d+", name):
            index = int(name[1:])
            if index > 31:
                raise _LineError(f"register {token} out of range")
            return index
        raise _LineError(f"not a register: {token!r}")

    @staticmethod
    def _immediate(token, lo, hi, what):
        try:
            value = int(token.strip(), 0)
        except ValueError:
            raise _LineError(f"bad immediate {token!r}")
        if not lo <= value <= hi:
            raise _LineError(f"immediate {value} out of range [{lo}, {hi}] for {what}")
        return value

    def _memory_operand(self, token, what):
        match = MEMORY_RE.match(token.strip())
        if match is None:
            raise _LineError(f"{what} expects offset(register), got {token!r}")
        offset = match.group(1).strip()
        return (self._immediate(offset, -2048, 2047, what) if offset else 0), self._register(match.group(2))

    def _csr(self, token):
        name = token.strip().lower()
        if name in CSR_NAMES:
            return CSR_NAMES[name]
        return self._immediate(token, 0, 4095, "csr number")

    def _target(self, token, pc, labels, origin, bound, what):
        token = token.strip()
        if token in labels:
            offset = origin + 4 * labels[token] - pc
        elif IDENTIFIER_RE.match(token):
            raise _LineError(f"undefined label {token}")
        else:
            offset = self._immediate(token, -bound, bound - 2, what)
        if offset % 2 or not -bound <= offset <= bound - 2:
            raise _LineError(f"{what} offset {offset} out of range")
        return offset

    def _branch(self, op, rs1, rs2, token, pc, labels, origin):
        offset = self._target(token, pc, labels, origin, 1 << 12, op)
        return Instruction(InstrKind.BRANCH, rs1=rs1, rs2=rs2, imm=offset, op=op)

    def _jal(self, rd, token, pc, labels, origin):
        return Instruction(InstrKind.JUMP, rd=rd, imm=self._target(token, pc, labels, origin, 1 << 20, "jal"), op="jal")

    def _report(self, line, severity, message, filename):
        self.diagnostics.append(AsmDiagnostic(line, severity, message, filename))

    # ------------------------------------------------------------------ disassembly

    @staticmethod
    def disassemble(program):
        """
        Canonical text of a Program: real instructions only, numeric pc-relative offsets,
        labels re-emitted at their indices and the data image as .org/.word.
        """
        at_index = dict()
        for name, index in sorted(program.labels.items(), key=lambda item: item[1]):
            at_index.setdefault(index, []).append(name)
        lines = []
        for index, instr in enumerate(program.instrs):
            lines.extend(f"{name}:" for name in at_index.get(index, []))
            lines.append(format_instruction(instr))
        expected = None
        for address, word in program.data:
            if address != expected:
                lines.append(f".org 0x{address:08x}")
            lines.append(f".word 0x{u32(word):08x}")
            expected = address + 4
        return SourceUnit(lines, "<disassembly>")


def format_instruction(i):
    kind = i.kind
    if kind in VECTOR_KINDS:
        registers = (i.rd, i.rs1, i.rs2)
        operands = [f"(x{r})" if paren else f"x{r}" for r, paren in zip(registers, VECTOR_SYNTAX[kind])]
        return f"{i.op} " + ",".join(operands)
    op = i.op
    if kind in (InstrKind.ALU_REG, InstrKind.MULDIV):
        return f"{op} x{i.rd}, x{i.rs1}, x{i.rs2}"
    if kind is InstrKind.ALU_IMM:
        return f"{op} x{i.rd}, x{i.rs1}, {i.imm}"
    if kind in (InstrKind.LOAD, InstrKind.JUMP_REG):
        return f"{op} x{i.rd}, {i.imm}(x{i.rs1})"
    if kind is InstrKind.STORE:
        return f"{op} x{i.rs2}, {i.imm}(x{i.rs1})"
    if kind is InstrKind.BRANCH:
        return f"{op} x{i.rs1}, x{i.rs2}, {i.imm}"
    if kind is InstrKind.JUMP:
        return f"{op} x{i.rd}, {i.imm}"
    if kind is InstrKind.UPPER_IMM:
        return f"{op} x{i.rd}, 0x{u32(i.imm) >> 12:05x}"
    if kind is InstrKind.CSR:
        source = f"{i.rs1}" if op.endswith("i") else f"x{i.rs1}"
        return f"{op} x{i.rd}, 0x{i.imm:03x}, {source}"
    return op


def _unwrap(token):
    token = token.strip()
    if token.startswith("(") and token.endswith(")"):
        return token[1:-1].strip(), True
    return token, False


def _li_parts(value):
    """
    Immediate split of li: one addi when it fits 12 bits, else lui hi then addi lo (lo may be 0).
    """
    value = s32(value)
    if -2048 <= value <= 2047:
        return [value]
    hi = ((value + 0x800) >> 12) & 0xFFFFF
    return [hi, s32(value - s32(hi << 12))]


def assemble(src, origin=PROGRAM_ORIGIN):
    return Assembler(origin).assemble(src)


def disassemble(program):
    return Assembler.disassemble(program)
