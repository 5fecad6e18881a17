"""Late-payment prediction and collection prioritization for accounts receivable invoices."""

__version__ = "0.1.0"
