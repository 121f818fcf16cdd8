class SimulatorTrap(RuntimeError):
    """
    Raised when simulated code does something the machine cannot execute (bad address, illegal instruction, ...).
    """
    def __init__(self, reason, hart=None, pc=None, address=None) -> None:
        self.reason = reason
        self.hart = hart
        self.pc = pc
        self.address = address
        parts = [reason]
        if hart is not None:
            parts.append(f"hart={hart}")
        if pc is not None:
            parts.append(f"pc=0x{pc:08x}")
        if address is not None:
            parts.append(f"addr=0x{address & 0xFFFFFFFF:08x}")
        super().__init__(" ".join(parts))

    def at(self, hart, pc):
        """
        Fills in the hart/pc context if the raising layer did not know it.
        """
        if self.hart is None and self.pc is None:
            return SimulatorTrap(self.reason, hart, pc, self.address)
        return self


class AssemblyError(ValueError):
    def __init__(self, diagnostics) -> None:
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__("\n".join(str(d) for d in errors))


class ConfigError(ValueError):
    pass


class KernelBuildError(ValueError):
    pass


class OracleMismatchError(RuntimeError):
    pass
