"""時間格單光子時間模式斷層掃描."""
