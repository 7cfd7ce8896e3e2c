"""例外類別."""


class TomographyError(Exception):
    """本套件所有錯誤的基底類別."""


class InvalidArgumentError(TomographyError, ValueError):
    """參數不合法."""


class GridMismatchError(InvalidArgumentError):
    """兩個物件的時間網格不一致."""


class ConfigError(InvalidArgumentError):
    """設定檔內容錯誤（含未知鍵值）."""


class DegenerateInputError(TomographyError, ValueError):
    """輸入退化（零向量、非正跡等）."""


class RegimeError(TomographyError, ValueError):
    """參數不在 Rabi 振盪（欠阻尼）區間."""


class AliasingError(TomographyError, ValueError):
    """時間網格無法解析頻譜頻寬."""


class ModelError(TomographyError, RuntimeError):
    """協方差矩陣非半正定，通常代表輸入的 ρ 不合法."""


class EmptyPhaseError(TomographyError, ValueError):
    """所有元素都低於相位門檻."""


class StorageError(TomographyError, OSError):
    """檔案缺失或內容損毀."""
