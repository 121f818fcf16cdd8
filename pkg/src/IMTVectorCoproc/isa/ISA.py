from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.config import CSR_VLEN, CSR_EWIDTH, CSR_PSCALE, CSR_CYCLE, CSR_CYCLEH, CSR_HARTID

"""
Decoded instruction set: the RV32IM scalar subset plus the 18 custom vector instructions, per-hart architectural state and static classification.
"""

MASK32 = 0xFFFFFFFF
EWIDTHS = (8, 16, 32)


def u32(value):
    return value & MASK32


def s32(value):
    value &= MASK32
    return value - (1 << 32) if value & 0x80000000 else value


class InstrKind(Enum):
    ALU_REG = "alu-reg"
    ALU_IMM = "alu-imm"
    LOAD = "load"
    STORE = "store"
    BRANCH = "branch"
    JUMP = "jump"
    JUMP_REG = "jump-register"
    UPPER_IMM = "upper-immediate"
    CSR = "csr-access"
    MULDIV = "mul/div"
    HALT = "halt"
    KMEMLD = "kmemld"
    KMEMSTR = "kmemstr"
    KADDV = "kaddv"
    KSUBV = "ksubv"
    KVMUL = "kvmul"
    KVRED = "kvred"
    KDOTP = "kdotp"
    KSVADDSC = "ksvaddsc"
    KSVADDRF = "ksvaddrf"
    KSVMULS = "ksvmuls"
    KSVMULRF = "ksvmulrf"
    KDOTPPS = "kdotpps"
    KSRLV = "ksrlv"
    KSRAV = "ksrav"
    KRELU = "krelu"
    KVSLT = "kvslt"
    KSVSLT = "ksvslt"
    KVCP = "kvcp"


class FunctionalUnitClass(Enum):
    ADDER = "adder"
    MULTIPLIER = "multiplier"
    SHIFTER = "shifter"
    COMPARE = "compare"
    MOVE = "move"


VECTOR_KINDS = frozenset([
    InstrKind.KMEMLD, InstrKind.KMEMSTR, InstrKind.KADDV, InstrKind.KSUBV, InstrKind.KVMUL, InstrKind.KVRED,
    InstrKind.KDOTP, InstrKind.KSVADDSC, InstrKind.KSVADDRF, InstrKind.KSVMULS, InstrKind.KSVMULRF,
    InstrKind.KDOTPPS, InstrKind.KSRLV, InstrKind.KSRAV, InstrKind.KRELU, InstrKind.KVSLT, InstrKind.KSVSLT,
    InstrKind.KVCP,
])
TRANSFER_KINDS = frozenset([InstrKind.KMEMLD, InstrKind.KMEMSTR])
TWO_OPERAND_KINDS = frozenset([InstrKind.KVRED, InstrKind.KRELU, InstrKind.KVCP])

UNIT_OF_KIND = {
    InstrKind.KADDV: FunctionalUnitClass.ADDER,
    InstrKind.KSUBV: FunctionalUnitClass.ADDER,
    InstrKind.KVRED: FunctionalUnitClass.ADDER,
    InstrKind.KSVADDSC: FunctionalUnitClass.ADDER,
    InstrKind.KSVADDRF: FunctionalUnitClass.ADDER,
    InstrKind.KVMUL: FunctionalUnitClass.MULTIPLIER,
    InstrKind.KSVMULS: FunctionalUnitClass.MULTIPLIER,
    InstrKind.KSVMULRF: FunctionalUnitClass.MULTIPLIER,
    InstrKind.KDOTP: FunctionalUnitClass.MULTIPLIER,
    InstrKind.KDOTPPS: FunctionalUnitClass.MULTIPLIER,
    InstrKind.KSRLV: FunctionalUnitClass.SHIFTER,
    InstrKind.KSRAV: FunctionalUnitClass.SHIFTER,
    InstrKind.KRELU: FunctionalUnitClass.COMPARE,
    InstrKind.KVSLT: FunctionalUnitClass.COMPARE,
    InstrKind.KSVSLT: FunctionalUnitClass.COMPARE,
    InstrKind.KVCP: FunctionalUnitClass.MOVE,
}

# operand syntax, True where the operand is written "(r)"
VECTOR_SYNTAX: Dict[InstrKind, Tuple[bool, ...]] = {
    InstrKind.KMEMLD: (True, True, False),
    InstrKind.KMEMSTR: (True, True, False),
    InstrKind.KADDV: (True, True, True),
    InstrKind.KSUBV: (True, True, True),
    InstrKind.KVMUL: (True, True, True),
    InstrKind.KVRED: (True, True),
    InstrKind.KDOTP: (True, True, True),
    InstrKind.KSVADDSC: (True, True, True),
    InstrKind.KSVADDRF: (True, True, False),
    InstrKind.KSVMULS: (True, True, True),
    InstrKind.KSVMULRF: (True, True, False),
    InstrKind.KDOTPPS: (True, True, True),
    InstrKind.KSRLV: (True, True, False),
    InstrKind.KSRAV: (True, True, False),
    InstrKind.KRELU: (True, True),
    InstrKind.KVSLT: (True, True, True),
    InstrKind.KSVSLT: (True, True, False),
    InstrKind.KVCP: (True, True),
}

SCALAR_OPS = {
    **{op: InstrKind.ALU_REG for op in ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and")},
    **{op: InstrKind.ALU_IMM for op in ("addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai")},
    **{op: InstrKind.LOAD for op in ("lb", "lh", "lw", "lbu", "lhu")},
    **{op: InstrKind.STORE for op in ("sb", "sh", "sw")},
    **{op: InstrKind.BRANCH for op in ("beq", "bne", "blt", "bge", "bltu", "bgeu")},
    "jal": InstrKind.JUMP,
    "jalr": InstrKind.JUMP_REG,
    "lui": InstrKind.UPPER_IMM,
    "auipc": InstrKind.UPPER_IMM,
    **{op: InstrKind.CSR for op in ("csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci")},
    **{op: InstrKind.MULDIV for op in ("mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu")},
    "ebreak": InstrKind.HALT,
}


@dataclass(frozen=True)
class Instruction:
    kind: InstrKind
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    op: Optional[str] = None

    def __post_init__(self):
        for name in ("rd", "rs1", "rs2"):
            index = getattr(self, name)
            if not 0 <= index <= 31:
                raise ValueError(f"{name}={index} is not a register index")
        if self.kind in VECTOR_KINDS:
            if self.imm != 0:
                raise ValueError(f"{self.kind.value} carries no immediate")
            if self.kind in TWO_OPERAND_KINDS and self.rs2 != 0:
                raise ValueError(f"{self.kind.value} takes only rd and rs1")
            if self.op is None:
                object.__setattr__(self, "op", self.kind.value)
            elif self.op != self.kind.value:
                raise ValueError(f"op {self.op} does not match kind {self.kind.value}")
        else:
            if self.op is None or SCALAR_OPS.get(self.op) is not self.kind:
                raise ValueError(f"op {self.op} is not a {self.kind.value} instruction")
            if not -(1 << 31) <= self.imm < (1 << 32):
                raise ValueError(f"immediate {self.imm} does not fit 32 bits")
            object.__setattr__(self, "imm", s32(self.imm))


NOP = Instruction(InstrKind.ALU_IMM, op="addi")


def is_coprocessor(i):
    return i.kind in VECTOR_KINDS


def classify_unit(i):
    """
    Functional unit class of the MFU that executes an arithmetic vector instruction.
    :param: i Instruction of a vector kind other than kmemld/kmemstr.
    """
    try:
        return UNIT_OF_KIND[i.kind]
    except KeyError:
        raise ValueError(f"{i.kind.value} does not execute on an MFU functional unit")


def writes_register(i):
    if i.kind not in VECTOR_KINDS:
        raise ValueError(f"{i.kind.value} is not a vector instruction")
    return i.kind in (InstrKind.KDOTP, InstrKind.KDOTPPS)


@dataclass
class ControlRegisters:
    hartid: int
    vlen: int = 0
    ewidth: int = 32
    pscale: int = 0

    def read(self, csr, cycle):
        if csr == CSR_VLEN:
            return self.vlen
        if csr == CSR_EWIDTH:
            return self.ewidth
        if csr == CSR_PSCALE:
            return self.pscale
        if csr == CSR_CYCLE:
            return u32(cycle)
        if csr == CSR_CYCLEH:
            return u32(cycle >> 32)
        if csr == CSR_HARTID:
            return self.hartid
        raise SimulatorTrap(f"unknown csr 0x{csr:03x}")

    def write(self, csr, value):
        if csr == CSR_VLEN:
            self.vlen = u32(value)
        elif csr == CSR_EWIDTH:
            if value not in EWIDTHS:
                raise SimulatorTrap(f"element width {value} not in {EWIDTHS}")
            self.ewidth = value
        elif csr == CSR_PSCALE:
            if u32(value) > 31:
                raise SimulatorTrap(f"pscale {u32(value)} outside [0, 31]")
            self.pscale = u32(value)
        elif csr in (CSR_CYCLE, CSR_CYCLEH, CSR_HARTID):
            raise SimulatorTrap(f"write to read-only csr 0x{csr:03x}")
        else:
            raise SimulatorTrap(f"unknown csr 0x{csr:03x}")


@dataclass
class HartContext:
    hartid: int
    pc: int = 0
    regs: List[int] = field(default_factory=lambda: [0] * 32)
    ctrl: ControlRegisters = None
    halted: bool = False

    def __post_init__(self):
        if self.ctrl is None:
            self.ctrl = ControlRegisters(self.hartid)
        if self.pc % 4:
            raise ValueError(f"pc 0x{self.pc:x} is not 4-byte aligned")

    def read(self, index):
        return self.regs[index]

    def write(self, index, value):
        if index != 0:
            self.regs[index] = value & MASK32


@dataclass
class Program:
    instrs: List[Instruction] = field(default_factory=list)
    labels: Dict[str, int] = field(default_factory=dict)
    origin: int = 0
    data: List[Tuple[int, int]] = field(default_factory=list)  # (byte address, word) for data memory

    def __post_init__(self):
        if self.origin % 4:
            raise ValueError("program origin must be 4-byte aligned")
        for name, index in self.labels.items():
            if not 0 <= index < len(self.instrs):
                raise ValueError(f"label {name} points outside the program")

    def __len__(self):
        return len(self.instrs)

    def pc_of(self, index):
        return self.origin + 4 * index

    def index_of(self, pc):
        return (pc - self.origin) >> 2

    def contains(self, pc):
        return pc % 4 == 0 and 0 <= pc - self.origin < 4 * len(self.instrs)

    def address_of(self, label):
        return self.pc_of(self.labels[label])
